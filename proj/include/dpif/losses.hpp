// dpif/losses.hpp

// Copyright 2026  DPIF authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPIF_LOSSES_HPP
#define DPIF_LOSSES_HPP

#include "dpif/dpit.hpp"

namespace dpif {

struct LossConfig {
  double lambda = 1e-5;
  /// When set, the visible embeddings inside the pose-correction loss are
  /// treated as fixed targets (no gradient). Off by default: shared layers
  /// stay live in both streams.
  bool detach_visible = false;
};

/// Softmax cross-entropy of (typically thermal) embeddings against the
/// visible-trained classifier. Mean over the batch.
Tensor cross_spectrum_loss(const Tensor& embeddings, const Tensor& onehot,
                           const DpitModel& model);

/// Sum over the batch of squared distances between identity-paired
/// visible and thermal representations.
Tensor pose_correction_loss(const Tensor& visible_embeddings,
                            const Tensor& thermal_embeddings);

/// L = L_C + lambda * L_P. lambda = 0 degenerates to L_C alone.
Tensor joint_loss(const Tensor& l_c, const Tensor& l_p, double lambda);

/// One-hot rows for integer class labels.
Tensor one_hot(const std::vector<int>& labels, int num_classes,
               Dtype dt = Dtype::f32);

}  // namespace dpif

#endif  // DPIF_LOSSES_HPP
