// dpif/tensor.cpp

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

#include "dpif/tensor.hpp"

#include <cmath>
#include <sstream>

namespace dpif {

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) {
    require(e > 0, ErrorCode::invalid_argument,
            "tensor extents must be positive, got " + shape_str(s));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace {
std::shared_ptr<TensorImpl> make_impl(const Shape& shape, Dtype dt) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->dtype = dt;
  size_t n = static_cast<size_t>(shape_numel(shape));
  if (dt == Dtype::f32)
    impl->values = std::vector<float>(n, 0.0f);
  else
    impl->values = std::vector<double>(n, 0.0);
  return impl;
}
}  // namespace

Tensor Tensor::zeros(const Shape& shape, Dtype dt) {
  return Tensor(make_impl(shape, dt));
}

Tensor Tensor::full(const Shape& shape, double value, Dtype dt) {
  Tensor t = zeros(shape, dt);
  if (dt == Dtype::f32) {
    for (auto& v : t.vals<float>()) v = static_cast<float>(value);
  } else {
    for (auto& v : t.vals<double>()) v = value;
  }
  return t;
}

Tensor Tensor::from_f32(const Shape& shape, std::vector<float> data) {
  require(shape_numel(shape) == static_cast<int64_t>(data.size()),
          ErrorCode::shape_mismatch,
          "from_f32: " + std::to_string(data.size()) +
              " values do not fill shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->dtype = Dtype::f32;
  impl->values = std::move(data);
  return Tensor(impl);
}

Tensor Tensor::from_f64(const Shape& shape, std::vector<double> data) {
  require(shape_numel(shape) == static_cast<int64_t>(data.size()),
          ErrorCode::shape_mismatch,
          "from_f64: " + std::to_string(data.size()) +
              " values do not fill shape " + shape_str(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = shape;
  impl->dtype = Dtype::f64;
  impl->values = std::move(data);
  return Tensor(impl);
}

Tensor Tensor::scalar(double value, Dtype dt) { return full({1}, value, dt); }

void Tensor::set_requires_grad(bool rg) {
  require(impl_ != nullptr, ErrorCode::state, "undefined tensor");
  impl_->requires_grad = rg;
  if (!rg) impl_->clear_grad();
}

double Tensor::at(int64_t i) const {
  if (impl_->dtype == Dtype::f32)
    return static_cast<double>(impl_->vals<float>()[static_cast<size_t>(i)]);
  return impl_->vals<double>()[static_cast<size_t>(i)];
}

void Tensor::set(int64_t i, double v) {
  if (impl_->dtype == Dtype::f32)
    impl_->vals<float>()[static_cast<size_t>(i)] = static_cast<float>(v);
  else
    impl_->vals<double>()[static_cast<size_t>(i)] = v;
}

Tensor Tensor::astype(Dtype dt) const {
  Tensor out = zeros(shape(), dt);
  int64_t n = numel();
  for (int64_t i = 0; i < n; ++i) out.set(i, at(i));
  return out;
}

Tensor Tensor::detached_copy() const {
  Tensor out = zeros(shape(), dtype());
  if (dtype() == Dtype::f32)
    out.vals<float>() = vals<float>();
  else
    out.vals<double>() = vals<double>();
  return out;
}

Tensor Tensor::grad_tensor() const {
  if (!impl_->has_grad()) return Tensor();
  Tensor out = zeros(shape(), dtype());
  if (dtype() == Dtype::f32)
    out.vals<float>() = std::get<std::vector<float>>(impl_->grad);
  else
    out.vals<double>() = std::get<std::vector<double>>(impl_->grad);
  return out;
}

bool Tensor::all_finite() const {
  int64_t n = numel();
  if (dtype() == Dtype::f32) {
    for (float v : vals<float>())
      if (!std::isfinite(v)) return false;
  } else {
    for (double v : vals<double>())
      if (!std::isfinite(v)) return false;
  }
  (void)n;
  return true;
}

}  // namespace dpif
