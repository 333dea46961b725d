// dpif/backbone.hpp

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

#ifndef DPIF_BACKBONE_HPP
#define DPIF_BACKBONE_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpif/autodiff.hpp"
#include "dpif/weights.hpp"

namespace dpif {

enum class Family { vgg16, resnet50, tiny };

const char* family_name(Family f);
std::optional<Family> family_from_name(const std::string& s);

/// One structural element of a backbone. Plain convolutions carry an
/// optional inference-mode batch norm; bottlenecks are the standard
/// three-conv residual unit with an optional projection shortcut.
struct BackboneBlock {
  enum class Kind { conv, pool, bottleneck };
  Kind kind;
  std::string name;      // layer name (parameter prefix)
  std::string boundary;  // truncation boundary label, empty if none

  // conv
  int kernel = 0;
  int out_channels = 0;
  int stride = 1;
  bool batch_norm = false;
  bool relu_after = true;

  // pool
  int window = 0;
  Padding pad = Padding::same;

  // bottleneck
  int width = 0;  // bottleneck channel count; out_channels is the unit output
};

/// Declarative layer list for one family, cut at a named truncation
/// boundary. The per-family tables are fixed; only the cut point varies.
struct BackboneSpec {
  Family family = Family::tiny;
  std::string truncation;
  int input_size = 32;
  std::vector<BackboneBlock> blocks;

  static BackboneSpec make(Family family, const std::string& truncation);
  /// Boundary names that are valid truncation points, shallow to deep.
  static std::vector<std::string> truncation_points(Family family);
  static std::string default_truncation(Family family);

  /// Static shape trace for a [1, input_size, input_size, 3] input.
  Shape output_shape() const;
  /// (boundary, shape) for every boundary up to the truncation point.
  std::vector<std::pair<std::string, Shape>> boundary_shapes() const;
};

/// Frozen feature extractor. Immutable after construction; safe to share
/// across threads for concurrent forward passes.
class Backbone {
 public:
  static Backbone build(const BackboneSpec& spec, const WeightStore& weights);
  static Backbone build_seeded(const BackboneSpec& spec, uint64_t seed);

  /// [N, s, s, 3] -> [N, h, w, C]. Pure function of (weights, input); no
  /// gradient graph is recorded through backbone parameters.
  Tensor forward(const Tensor& images) const;

  const BackboneSpec& spec() const { return spec_; }
  const ParameterSet& params() const { return params_; }
  int64_t param_count() const;
  Shape output_shape() const { return spec_.output_shape(); }
  WeightStore weights() const;

 private:
  Backbone() = default;
  Tensor forward_impl(const Tensor& images,
                      std::vector<std::pair<std::string, Shape>>* ledger) const;
  friend std::vector<std::pair<std::string, Shape>> truncation_sweep(
      Family family, const Tensor& images);

  BackboneSpec spec_;
  ParameterSet params_;
};

/// Runs the deepest truncation of `family` over `images` once and reports
/// the observed output shape at each enumerated truncation boundary.
/// Only defined for the two full-scale families.
std::vector<std::pair<std::string, Shape>> truncation_sweep(
    Family family, const Tensor& images);

}  // namespace dpif

#endif  // DPIF_BACKBONE_HPP
