// dpif/autodiff.hpp

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

#ifndef DPIF_AUTODIFF_HPP
#define DPIF_AUTODIFF_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpif/rng.hpp"
#include "dpif/tensor.hpp"

namespace dpif {

enum class Padding { same, valid };
enum class Act { tanh, relu };

const char* act_name(Act a);
std::optional<Act> act_from_name(const std::string& s);

/// Output extent of a strided window op. Same padding follows
/// H' = ceil(H / stride); total pad = max(0, (H'-1)*stride + K - H),
/// split low-side-first.
int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride,
                        Padding pad);
int64_t pad_low(int64_t in, int64_t kernel, int64_t stride, Padding pad);

// ---------------------------------------------------------------------------
// Forward operations. All record reverse-mode closures when any input
// requires gradients; otherwise the result is a plain leaf.
// ---------------------------------------------------------------------------

/// 2-D convolution, NHWC input [N,H,W,Ci], kernel [Kh,Kw,Ci,Co], bias [Co].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, Padding pad);

/// Grouped convolution with `groups` filter groups; kernels[g] has shape
/// [Kh,Kw,Ci/groups,Co/groups] and consumes/produces the g-th channel range.
Tensor grouped_conv2d(const Tensor& input, const std::vector<Tensor>& kernels,
                      const Tensor& bias, int groups, int stride = 1,
                      Padding pad = Padding::same);

/// Max pooling. Gradient routes to the argmax position, first occurrence
/// (row-major window scan) on ties.
Tensor maxpool2d(const Tensor& input, int window, int stride,
                 Padding pad = Padding::valid);

Tensor activation(const Tensor& input, Act kind);

/// Affine map, input [N,D] x weights [D,U] + bias [U].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

/// Mean over the batch of -log softmax(logits) at the labeled class.
/// Labels are one-hot (rows must sum to 1). Max-subtraction stabilized.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& labels);

/// Sum over all elements of (a - b)^2; scalar result.
Tensor sum_squared_error(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);       // same-shape elementwise
Tensor scale(const Tensor& a, double s);            // a * s
Tensor sum(const Tensor& a);                        // scalar sum
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor slice_channels(const Tensor& a, int64_t c0, int64_t c1);
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor detach(const Tensor& a);                     // graph-free leaf copy

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

/// Walks the graph rooted at `loss` (must be scalar) in reverse topological
/// order and accumulates gradients into every node that requires them.
/// All reachable gradients are cleared first, so repeated calls on the
/// same graph yield identical results.
void backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Parameters and optimization
// ---------------------------------------------------------------------------

struct Parameter {
  std::string name;  // hierarchical, dot-separated
  Tensor tensor;
  bool trainable = true;
};

/// Ordered, uniquely-named parameter container.
class ParameterSet {
 public:
  Parameter& add(const std::string& name, Tensor t, bool trainable = true);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::vector<Parameter>& items() { return items_; }
  const std::vector<Parameter>& items() const { return items_; }
  size_t size() const { return items_.size(); }

  void set_trainable(const std::string& prefix, bool trainable);
  int64_t count_trainable() const;

 private:
  std::vector<Parameter> items_;
};

using GradMap = std::map<std::string, Tensor>;

/// Runs backward(loss) and harvests gradients for every trainable
/// parameter that the loss reaches. Parameters the graph does not touch
/// are absent from the map.
GradMap collect_gradients(const Tensor& loss, const ParameterSet& params);

enum class OptimKind { sgd, adaptive_moment };

struct OptimConfig {
  OptimKind kind = OptimKind::adaptive_moment;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// SGD / adaptive-moment update. State (first/second moments, step count)
/// is kept per parameter name and can round-trip through a WeightStore.
class Optimizer {
 public:
  explicit Optimizer(OptimConfig cfg) : cfg_(cfg) {}

  /// Applies one update to every parameter in `params`. Every parameter
  /// passed must be trainable and must have an entry in `grads`.
  void step(const std::vector<Parameter*>& params, const GradMap& grads);

  const OptimConfig& config() const { return cfg_; }

  struct MomentState {
    std::vector<double> m, v;
    int64_t t = 0;
  };
  std::map<std::string, MomentState>& state() { return state_; }
  const std::map<std::string, MomentState>& state() const { return state_; }

 private:
  OptimConfig cfg_;
  std::map<std::string, MomentState> state_;
};

/// Fan-in-scaled uniform fill: U(-sqrt(3/fan_in), +sqrt(3/fan_in)).
void init_fan_in_uniform(Tensor& t, int64_t fan_in, Rng& rng);

}  // namespace dpif

#endif  // DPIF_AUTODIFF_HPP
