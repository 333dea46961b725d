// dpif/losses.cpp

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

#include "dpif/losses.hpp"

#include <cmath>

namespace dpif {

Tensor cross_spectrum_loss(const Tensor& embeddings, const Tensor& onehot,
                           const DpitModel& model) {
  Tensor logits = model.classify(embeddings);
  return softmax_cross_entropy(logits, onehot);
}

Tensor pose_correction_loss(const Tensor& visible_embeddings,
                            const Tensor& thermal_embeddings) {
  return sum_squared_error(visible_embeddings, thermal_embeddings);
}

Tensor joint_loss(const Tensor& l_c, const Tensor& l_p, double lambda) {
  require(lambda >= 0.0, ErrorCode::invalid_argument,
          "loss weight lambda must be >= 0, got " + std::to_string(lambda));
  require(l_c.numel() == 1 && l_p.numel() == 1, ErrorCode::shape_mismatch,
          "joint_loss expects scalar terms");
  require(std::isfinite(l_c.at(0)) && std::isfinite(l_p.at(0)),
          ErrorCode::invalid_argument, "joint_loss terms must be finite");
  if (lambda == 0.0) return l_c;
  return add(l_c, scale(l_p, lambda));
}

Tensor one_hot(const std::vector<int>& labels, int num_classes, Dtype dt) {
  require(num_classes >= 1, ErrorCode::invalid_argument,
          "one_hot needs at least one class");
  Tensor out = Tensor::zeros(
      {static_cast<int64_t>(labels.size()), num_classes}, dt);
  for (size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes,
            ErrorCode::invalid_argument,
            "label " + std::to_string(labels[i]) + " outside [0," +
                std::to_string(num_classes) + ")");
    out.set(static_cast<int64_t>(i) * num_classes + labels[i], 1.0);
  }
  return out;
}

}  // namespace dpif
