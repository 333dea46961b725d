// dpif/tensor.hpp

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

#ifndef DPIF_TENSOR_HPP
#define DPIF_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "dpif/error.hpp"

namespace dpif {

enum class Dtype { f32, f64 };

inline const char* dtype_name(Dtype d) {
  return d == Dtype::f32 ? "f32" : "f64";
}
inline size_t dtype_size(Dtype d) {
  return d == Dtype::f32 ? sizeof(float) : sizeof(double);
}

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);
bool same_shape(const Shape& a, const Shape& b);

/// Graph node + storage behind a Tensor. Values (and gradients, when
/// present) live in row-major dense buffers of the tensor's dtype.
/// `parents` / `backward_fn` are populated only when the result requires
/// gradients, so inference passes record no graph.
struct TensorImpl {
  Shape shape;
  Dtype dtype = Dtype::f32;
  std::variant<std::vector<float>, std::vector<double>> values;
  std::variant<std::monostate, std::vector<float>, std::vector<double>> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;
  const char* op = "leaf";

  int64_t numel() const { return shape_numel(shape); }

  template <typename T>
  std::vector<T>& vals() {
    return std::get<std::vector<T>>(values);
  }
  template <typename T>
  const std::vector<T>& vals() const {
    return std::get<std::vector<T>>(values);
  }

  bool has_grad() const {
    return !std::holds_alternative<std::monostate>(grad);
  }
  void clear_grad() { grad = std::monostate{}; }

  /// Gradient buffer, zero-initialized on first access.
  template <typename T>
  std::vector<T>& grad_buf() {
    if (!std::holds_alternative<std::vector<T>>(grad))
      grad = std::vector<T>(static_cast<size_t>(numel()), T(0));
    return std::get<std::vector<T>>(grad);
  }
};

/// Dense N-dimensional array with row-major layout, participating in a
/// reverse-mode differentiation graph. Copying a Tensor shares storage.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(const Shape& shape, Dtype dt = Dtype::f32);
  static Tensor full(const Shape& shape, double value, Dtype dt = Dtype::f32);
  static Tensor from_f32(const Shape& shape, std::vector<float> data);
  static Tensor from_f64(const Shape& shape, std::vector<double> data);
  static Tensor scalar(double value, Dtype dt = Dtype::f32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int64_t size(int axis) const { return impl_->shape[static_cast<size_t>(axis)]; }
  int64_t numel() const { return impl_->numel(); }
  Dtype dtype() const { return impl_->dtype; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg);

  /// Flat element read, converted to double. Convenience for tests and
  /// small-scale code; hot paths use vals<T>() on the impl.
  double at(int64_t i) const;
  void set(int64_t i, double v);

  template <typename T>
  std::vector<T>& vals() {
    return impl_->vals<T>();
  }
  template <typename T>
  const std::vector<T>& vals() const {
    return impl_->vals<T>();
  }

  /// Leaf copy of this tensor's values in the requested precision.
  Tensor astype(Dtype dt) const;
  /// Leaf copy that does not participate in any graph.
  Tensor detached_copy() const;

  bool has_grad() const { return impl_->has_grad(); }
  /// Copy of the accumulated gradient as a leaf tensor (undefined Tensor
  /// when no gradient is stored).
  Tensor grad_tensor() const;
  void zero_grad() { impl_->clear_grad(); }

  bool all_finite() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// NHWC flat offset helpers.
inline int64_t idx3(int64_t h, int64_t w, int64_t c, int64_t W, int64_t C) {
  return (h * W + w) * C + c;
}
inline int64_t idx4(int64_t n, int64_t h, int64_t w, int64_t c, int64_t H,
                    int64_t W, int64_t C) {
  return ((n * H + h) * W + w) * C + c;
}

}  // namespace dpif

#endif  // DPIF_TENSOR_HPP
