// dpif/dpit.hpp

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

#ifndef DPIF_DPIT_HPP
#define DPIF_DPIT_HPP

#include <memory>
#include <string>
#include <vector>

#include "dpif/backbone.hpp"

namespace dpif {

/// Trainable head configuration. Channel widths follow the backbone
/// output: compression halves C, the grouped map halves again, and the
/// flattened h*w*(C/4) map is projected to `embed_dim`.
struct HeadConfig {
  int in_channels = 0;
  int spatial_h = 0;
  int spatial_w = 0;
  int f_inner = 200;
  int groups = 2;
  int embed_dim = 256;
  int num_classes = 0;
  Act f_act = Act::tanh;
  Act g_act = Act::relu;
};

/// Two-stream model: a frozen backbone feeding a shared compression,
/// thermal-only residual blocks F and G, a shared grouped map, a shared
/// embedding projection, and a visible identity classifier.
///
/// Visible path:  backbone -> compress -> grouped_map -> embed
/// Thermal path:  backbone -> compress -> F -> G -> grouped_map -> embed
/// compress / grouped / embed parameters are the same objects in both
/// paths, so one optimizer update moves both streams.
class DpitModel {
 public:
  DpitModel(std::shared_ptr<const Backbone> backbone, HeadConfig cfg,
            uint64_t seed);

  static DpitModel build(std::shared_ptr<const Backbone> backbone,
                         int embed_dim, int groups, int f_inner, Act f_act,
                         Act g_act, int num_classes, uint64_t seed);

  Tensor compress(const Tensor& xm) const;      // 1x1 conv + tanh, C -> C/2
  Tensor dpit_f(const Tensor& h) const;         // 3-layer residual block
  Tensor dpit_g(const Tensor& f) const;         // 2-layer residual block
  Tensor grouped_map(const Tensor& t) const;    // grouped 1x1 conv + relu
  Tensor embed(const Tensor& psi) const;        // flatten + dense, no act

  Tensor visible_head(const Tensor& xm) const;
  Tensor thermal_head(const Tensor& xm) const;
  Tensor embed_visible(const Tensor& images) const;
  Tensor embed_thermal(const Tensor& images) const;

  Tensor classify(const Tensor& embedding) const;

  /// Exact count of trainable scalar parameters in the current
  /// trainability state.
  int64_t count_trainable() const;

  void set_classifier_trainable(bool trainable);
  void set_fg_trainable(bool trainable);

  /// Parameter pointers per training phase selection.
  std::vector<Parameter*> shared_params();      // compress + grouped + embed
  std::vector<Parameter*> fg_params();          // F and G blocks
  std::vector<Parameter*> classifier_params();
  std::vector<Parameter*> phase1_params();      // shared + classifier
  std::vector<Parameter*> phase2_params();      // shared + F + G

  /// Parameter names touched by each stream (backbone excluded).
  std::vector<std::string> visible_param_names() const;
  std::vector<std::string> thermal_param_names() const;

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const HeadConfig& config() const { return cfg_; }
  const Backbone& backbone() const { return *backbone_; }
  std::shared_ptr<const Backbone> backbone_ptr() const { return backbone_; }

  /// Copies of all head parameter tensors keyed by name.
  WeightStore head_weights() const;
  /// Overwrites head parameters from a store (shapes must match).
  void load_head_weights(const WeightStore& store);

 private:
  std::shared_ptr<const Backbone> backbone_;
  HeadConfig cfg_;
  ParameterSet params_;
};

}  // namespace dpif

#endif  // DPIF_DPIT_HPP
