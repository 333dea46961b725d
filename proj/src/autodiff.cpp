// dpif/autodiff.cpp

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

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dpif/autodiff.hpp"

namespace dpif {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using MapCM = Eigen::Map<const MatRM<T>>;

void check_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  require(a.dtype() == b.dtype(), ErrorCode::invalid_argument,
          std::string(op) + ": mixed dtypes " + dtype_name(a.dtype()) +
              " vs " + dtype_name(b.dtype()));
}

std::shared_ptr<TensorImpl> make_out(
    const Shape& shape, Dtype dt, const char* op,
    std::initializer_list<std::shared_ptr<TensorImpl>> parents) {
  auto out = std::make_shared<TensorImpl>();
  out->shape = shape;
  out->dtype = dt;
  size_t n = static_cast<size_t>(shape_numel(shape));
  if (dt == Dtype::f32)
    out->values = std::vector<float>(n, 0.0f);
  else
    out->values = std::vector<double>(n, 0.0);
  out->op = op;
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  out->requires_grad = rg;
  if (rg) out->parents.assign(parents.begin(), parents.end());
  return out;
}

template <typename T>
void accumulate(std::vector<T>& dst, const T* src, size_t n) {
  for (size_t i = 0; i < n; ++i) dst[i] += src[i];
}

struct ConvGeom {
  int64_t N, H, W, Ci, Kh, Kw, Co, Ho, Wo;
  int64_t stride, pad_h, pad_w;  // low-side pads
};

ConvGeom conv_geometry(const Shape& in, const Shape& kernel, int stride,
                       Padding pad, const char* op) {
  require(in.size() == 4, ErrorCode::shape_mismatch,
          std::string(op) + ": input must be rank-4 NHWC, got " +
              shape_str(in));
  require(kernel.size() == 4, ErrorCode::shape_mismatch,
          std::string(op) + ": kernel must be rank-4 [Kh,Kw,Ci,Co], got " +
              shape_str(kernel));
  require(stride >= 1, ErrorCode::invalid_argument,
          std::string(op) + ": stride must be >= 1");
  ConvGeom g;
  g.N = in[0];
  g.H = in[1];
  g.W = in[2];
  g.Ci = in[3];
  g.Kh = kernel[0];
  g.Kw = kernel[1];
  require(kernel[2] == g.Ci, ErrorCode::shape_mismatch,
          std::string(op) + ": input channels of " + shape_str(in) +
              " do not match kernel " + shape_str(kernel));
  g.Co = kernel[3];
  g.stride = stride;
  g.Ho = conv_out_extent(g.H, g.Kh, stride, pad);
  g.Wo = conv_out_extent(g.W, g.Kw, stride, pad);
  g.pad_h = pad_low(g.H, g.Kh, stride, pad);
  g.pad_w = pad_low(g.W, g.Kw, stride, pad);
  return g;
}

/// Gathers the receptive fields of one batch item into a [Ho*Wo, Kh*Kw*Ci]
/// matrix (zeros beyond the border).
template <typename T>
void im2col(const T* x, const ConvGeom& g, std::vector<T>& col) {
  const int64_t cols = g.Kh * g.Kw * g.Ci;
  col.assign(static_cast<size_t>(g.Ho * g.Wo * cols), T(0));
  for (int64_t oh = 0; oh < g.Ho; ++oh) {
    for (int64_t ow = 0; ow < g.Wo; ++ow) {
      T* row = col.data() + (oh * g.Wo + ow) * cols;
      for (int64_t kh = 0; kh < g.Kh; ++kh) {
        int64_t ih = oh * g.stride - g.pad_h + kh;
        if (ih < 0 || ih >= g.H) continue;
        for (int64_t kw = 0; kw < g.Kw; ++kw) {
          int64_t iw = ow * g.stride - g.pad_w + kw;
          if (iw < 0 || iw >= g.W) continue;
          const T* src = x + idx3(ih, iw, 0, g.W, g.Ci);
          T* dst = row + (kh * g.Kw + kw) * g.Ci;
          std::copy(src, src + g.Ci, dst);
        }
      }
    }
  }
}

/// Scatter-adds a [Ho*Wo, Kh*Kw*Ci] gradient back through the im2col
/// gather of one batch item.
template <typename T>
void col2im_add(const std::vector<T>& col, const ConvGeom& g, T* dx) {
  const int64_t cols = g.Kh * g.Kw * g.Ci;
  for (int64_t oh = 0; oh < g.Ho; ++oh) {
    for (int64_t ow = 0; ow < g.Wo; ++ow) {
      const T* row = col.data() + (oh * g.Wo + ow) * cols;
      for (int64_t kh = 0; kh < g.Kh; ++kh) {
        int64_t ih = oh * g.stride - g.pad_h + kh;
        if (ih < 0 || ih >= g.H) continue;
        for (int64_t kw = 0; kw < g.Kw; ++kw) {
          int64_t iw = ow * g.stride - g.pad_w + kw;
          if (iw < 0 || iw >= g.W) continue;
          T* dst = dx + idx3(ih, iw, 0, g.W, g.Ci);
          const T* src = row + (kh * g.Kw + kw) * g.Ci;
          for (int64_t c = 0; c < g.Ci; ++c) dst[c] += src[c];
        }
      }
    }
  }
}

template <typename T>
void conv2d_forward_t(const TensorImpl& x, const TensorImpl& k,
                      const TensorImpl& b, const ConvGeom& g, TensorImpl& y) {
  const auto& xv = x.vals<T>();
  const auto& kv = k.vals<T>();
  const auto& bv = b.vals<T>();
  auto& yv = y.vals<T>();
  const int64_t cols = g.Kh * g.Kw * g.Ci;
  const int64_t rows = g.Ho * g.Wo;
  std::vector<T> col;
  MapCM<T> kmat(kv.data(), cols, g.Co);
  for (int64_t n = 0; n < g.N; ++n) {
    im2col(xv.data() + n * g.H * g.W * g.Ci, g, col);
    MapCM<T> cmat(col.data(), rows, cols);
    MapM<T> ymat(yv.data() + n * rows * g.Co, rows, g.Co);
    ymat.noalias() = cmat * kmat;
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < g.Co; ++c) ymat(r, c) += bv[static_cast<size_t>(c)];
  }
}

template <typename T>
void conv2d_backward_t(TensorImpl& self, const std::shared_ptr<TensorImpl>& x,
                       const std::shared_ptr<TensorImpl>& k,
                       const std::shared_ptr<TensorImpl>& b,
                       const ConvGeom& g) {
  const auto& gy = std::get<std::vector<T>>(self.grad);
  const int64_t cols = g.Kh * g.Kw * g.Ci;
  const int64_t rows = g.Ho * g.Wo;
  std::vector<T> col;
  const bool need_dx = x->requires_grad;
  const bool need_dw = k->requires_grad;
  const bool need_db = b->requires_grad;
  if (need_db) {
    auto& db = b->grad_buf<T>();
    for (int64_t n = 0; n < g.N; ++n) {
      const T* gyn = gy.data() + n * rows * g.Co;
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < g.Co; ++c)
          db[static_cast<size_t>(c)] += gyn[r * g.Co + c];
    }
  }
  if (!need_dx && !need_dw) return;
  const auto& xv = x->vals<T>();
  const auto& kv = k->vals<T>();
  for (int64_t n = 0; n < g.N; ++n) {
    MapCM<T> gym(gy.data() + n * rows * g.Co, rows, g.Co);
    if (need_dw) {
      im2col(xv.data() + n * g.H * g.W * g.Ci, g, col);
      MapCM<T> cmat(col.data(), rows, cols);
      auto& dw = k->grad_buf<T>();
      MapM<T> dwm(dw.data(), cols, g.Co);
      dwm.noalias() += cmat.transpose() * gym;
    }
    if (need_dx) {
      MapCM<T> kmat(kv.data(), cols, g.Co);
      std::vector<T> dcol(static_cast<size_t>(rows * cols));
      MapM<T> dcm(dcol.data(), rows, cols);
      dcm.noalias() = gym * kmat.transpose();
      auto& dx = x->grad_buf<T>();
      col2im_add(dcol, g, dx.data() + n * g.H * g.W * g.Ci);
    }
  }
}

}  // namespace

const char* act_name(Act a) { return a == Act::tanh ? "tanh" : "relu"; }

std::optional<Act> act_from_name(const std::string& s) {
  if (s == "tanh") return Act::tanh;
  if (s == "relu") return Act::relu;
  return std::nullopt;
}

int64_t conv_out_extent(int64_t in, int64_t kernel, int64_t stride,
                        Padding pad) {
  if (pad == Padding::same) return (in + stride - 1) / stride;
  require(in >= kernel, ErrorCode::shape_mismatch,
          "valid padding: window " + std::to_string(kernel) +
              " exceeds extent " + std::to_string(in));
  return (in - kernel) / stride + 1;
}

int64_t pad_low(int64_t in, int64_t kernel, int64_t stride, Padding pad) {
  if (pad == Padding::valid) return 0;
  int64_t out = (in + stride - 1) / stride;
  int64_t total = std::max<int64_t>(0, (out - 1) * stride + kernel - in);
  return total - total / 2;  // odd pad goes to the low side
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, Padding pad) {
  check_same_dtype(input, kernel, "conv2d");
  check_same_dtype(input, bias, "conv2d");
  ConvGeom g = conv_geometry(input.shape(), kernel.shape(), stride, pad,
                             "conv2d");
  require(bias.rank() == 1 && bias.size(0) == g.Co, ErrorCode::shape_mismatch,
          "conv2d: bias " + shape_str(bias.shape()) + " does not match " +
              std::to_string(g.Co) + " output channels");
  auto out = make_out({g.N, g.Ho, g.Wo, g.Co}, input.dtype(), "conv2d",
                      {input.impl(), kernel.impl(), bias.impl()});
  if (input.dtype() == Dtype::f32)
    conv2d_forward_t<float>(*input.impl(), *kernel.impl(), *bias.impl(), g,
                            *out);
  else
    conv2d_forward_t<double>(*input.impl(), *kernel.impl(), *bias.impl(), g,
                             *out);
  if (out->requires_grad) {
    auto xi = input.impl(), ki = kernel.impl(), bi = bias.impl();
    out->backward_fn = [xi, ki, bi, g](TensorImpl& self) {
      if (self.dtype == Dtype::f32)
        conv2d_backward_t<float>(self, xi, ki, bi, g);
      else
        conv2d_backward_t<double>(self, xi, ki, bi, g);
    };
  }
  return Tensor(out);
}

Tensor grouped_conv2d(const Tensor& input, const std::vector<Tensor>& kernels,
                      const Tensor& bias, int groups, int stride,
                      Padding pad) {
  require(groups >= 1, ErrorCode::invalid_argument,
          "grouped_conv2d: groups must be >= 1");
  require(static_cast<int>(kernels.size()) == groups,
          ErrorCode::invalid_argument,
          "grouped_conv2d: expected " + std::to_string(groups) +
              " kernel tensors, got " + std::to_string(kernels.size()));
  require(input.rank() == 4, ErrorCode::shape_mismatch,
          "grouped_conv2d: input must be rank-4 NHWC, got " +
              shape_str(input.shape()));
  int64_t ci = input.size(3);
  require(ci % groups == 0, ErrorCode::invalid_argument,
          "grouped_conv2d: " + std::to_string(groups) +
              " groups do not divide " + std::to_string(ci) +
              " input channels");
  int64_t co_g = kernels[0].size(3);
  int64_t co = co_g * groups;
  require(bias.rank() == 1 && bias.size(0) == co, ErrorCode::shape_mismatch,
          "grouped_conv2d: bias " + shape_str(bias.shape()) +
              " does not match " + std::to_string(co) + " output channels");
  int64_t ci_g = ci / groups;
  std::vector<Tensor> parts;
  parts.reserve(static_cast<size_t>(groups));
  for (int gi = 0; gi < groups; ++gi) {
    const Tensor& k = kernels[static_cast<size_t>(gi)];
    require(k.rank() == 4 && k.size(2) == ci_g && k.size(3) == co_g,
            ErrorCode::shape_mismatch,
            "grouped_conv2d: kernel " + std::to_string(gi) + " " +
                shape_str(k.shape()) + " inconsistent with per-group [" +
                std::to_string(ci_g) + " -> " + std::to_string(co_g) + "]");
    Tensor xg = slice_channels(input, gi * ci_g, (gi + 1) * ci_g);
    Tensor bg = slice_channels(bias, gi * co_g, (gi + 1) * co_g);
    parts.push_back(conv2d(xg, k, bg, stride, pad));
  }
  return concat_channels(parts);
}

Tensor maxpool2d(const Tensor& input, int window, int stride, Padding pad) {
  require(input.rank() == 4, ErrorCode::shape_mismatch,
          "maxpool2d: input must be rank-4 NHWC, got " +
              shape_str(input.shape()));
  require(window >= 1 && stride >= 1, ErrorCode::invalid_argument,
          "maxpool2d: window and stride must be >= 1");
  const int64_t N = input.size(0), H = input.size(1), W = input.size(2),
                C = input.size(3);
  require(window <= H && window <= W, ErrorCode::invalid_argument,
          "maxpool2d: window " + std::to_string(window) +
              " exceeds spatial extents " + shape_str(input.shape()));
  const int64_t Ho = conv_out_extent(H, window, stride, pad);
  const int64_t Wo = conv_out_extent(W, window, stride, pad);
  const int64_t ph = pad_low(H, window, stride, pad);
  const int64_t pw = pad_low(W, window, stride, pad);
  auto out = make_out({N, Ho, Wo, C}, input.dtype(), "maxpool2d",
                      {input.impl()});
  auto argmax = std::make_shared<std::vector<int64_t>>(
      static_cast<size_t>(N * Ho * Wo * C));
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& xv = input.vals<T>();
    auto& yv = out->vals<T>();
    int64_t oi = 0;
    for (int64_t n = 0; n < N; ++n)
      for (int64_t oh = 0; oh < Ho; ++oh)
        for (int64_t ow = 0; ow < Wo; ++ow)
          for (int64_t c = 0; c < C; ++c, ++oi) {
            T best = 0;
            int64_t best_i = -1;
            for (int64_t kh = 0; kh < window; ++kh) {
              int64_t ih = oh * stride - ph + kh;
              if (ih < 0 || ih >= H) continue;
              for (int64_t kw = 0; kw < window; ++kw) {
                int64_t iw = ow * stride - pw + kw;
                if (iw < 0 || iw >= W) continue;
                int64_t xi = idx4(n, ih, iw, c, H, W, C);
                if (best_i < 0 || xv[static_cast<size_t>(xi)] > best) {
                  best = xv[static_cast<size_t>(xi)];
                  best_i = xi;
                }
              }
            }
            yv[static_cast<size_t>(oi)] = best;
            (*argmax)[static_cast<size_t>(oi)] = best_i;
          }
  };
  if (input.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto xi = input.impl();
    out->backward_fn = [xi, argmax](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gy = std::get<std::vector<T>>(self.grad);
        auto& dx = xi->grad_buf<T>();
        for (size_t i = 0; i < gy.size(); ++i)
          dx[static_cast<size_t>((*argmax)[i])] += gy[i];
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor activation(const Tensor& input, Act kind) {
  auto out = make_out(input.shape(), input.dtype(), act_name(kind),
                      {input.impl()});
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& xv = input.vals<T>();
    auto& yv = out->vals<T>();
    if (kind == Act::tanh) {
      // Keep the open-interval (-1, 1) contract where rounding would
      // otherwise saturate to exactly +/-1.
      const T hi = std::nextafter(T(1), T(0));
      for (size_t i = 0; i < xv.size(); ++i) {
        T y = std::tanh(xv[i]);
        yv[i] = y >= T(1) ? hi : (y <= T(-1) ? -hi : y);
      }
    } else {
      for (size_t i = 0; i < xv.size(); ++i) yv[i] = xv[i] > T(0) ? xv[i] : T(0);
    }
  };
  if (input.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto xi = input.impl();
    out->backward_fn = [xi, kind](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gy = std::get<std::vector<T>>(self.grad);
        const auto& yv = self.vals<T>();
        auto& dx = xi->grad_buf<T>();
        if (kind == Act::tanh) {
          for (size_t i = 0; i < gy.size(); ++i)
            dx[i] += gy[i] * (T(1) - yv[i] * yv[i]);
        } else {
          for (size_t i = 0; i < gy.size(); ++i)
            if (yv[i] > T(0)) dx[i] += gy[i];
        }
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  check_same_dtype(input, weights, "dense");
  check_same_dtype(input, bias, "dense");
  require(input.rank() == 2, ErrorCode::shape_mismatch,
          "dense: input must be rank-2 [N,D], got " + shape_str(input.shape()));
  require(weights.rank() == 2, ErrorCode::shape_mismatch,
          "dense: weights must be rank-2 [D,U], got " +
              shape_str(weights.shape()));
  const int64_t N = input.size(0), D = input.size(1);
  require(weights.size(0) == D, ErrorCode::shape_mismatch,
          "dense: inner dims of input " + shape_str(input.shape()) +
              " and weights " + shape_str(weights.shape()) + " do not match");
  const int64_t U = weights.size(1);
  require(bias.rank() == 1 && bias.size(0) == U, ErrorCode::shape_mismatch,
          "dense: bias " + shape_str(bias.shape()) + " does not match " +
              std::to_string(U) + " units");
  auto out = make_out({N, U}, input.dtype(), "dense",
                      {input.impl(), weights.impl(), bias.impl()});
  auto run = [&](auto tag) {
    using T = decltype(tag);
    MapCM<T> x(input.vals<T>().data(), N, D);
    MapCM<T> w(weights.vals<T>().data(), D, U);
    const auto& bv = bias.vals<T>();
    MapM<T> y(out->vals<T>().data(), N, U);
    y.noalias() = x * w;
    for (int64_t n = 0; n < N; ++n)
      for (int64_t u = 0; u < U; ++u) y(n, u) += bv[static_cast<size_t>(u)];
  };
  if (input.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto xi = input.impl(), wi = weights.impl(), bi = bias.impl();
    out->backward_fn = [xi, wi, bi, N, D, U](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gyv = std::get<std::vector<T>>(self.grad);
        MapCM<T> gy(gyv.data(), N, U);
        if (wi->requires_grad) {
          MapCM<T> x(xi->vals<T>().data(), N, D);
          MapM<T> dw(wi->grad_buf<T>().data(), D, U);
          dw.noalias() += x.transpose() * gy;
        }
        if (xi->requires_grad) {
          MapCM<T> w(wi->vals<T>().data(), D, U);
          MapM<T> dx(xi->grad_buf<T>().data(), N, D);
          dx.noalias() += gy * w.transpose();
        }
        if (bi->requires_grad) {
          auto& db = bi->grad_buf<T>();
          for (int64_t n = 0; n < N; ++n)
            for (int64_t u = 0; u < U; ++u)
              db[static_cast<size_t>(u)] += gy(n, u);
        }
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& labels) {
  check_same_dtype(logits, labels, "softmax_cross_entropy");
  require(logits.rank() == 2 && labels.rank() == 2,
          ErrorCode::shape_mismatch,
          "softmax_cross_entropy: expected rank-2 [N,K] inputs, got " +
              shape_str(logits.shape()) + " and " + shape_str(labels.shape()));
  require(logits.shape() == labels.shape(), ErrorCode::shape_mismatch,
          "softmax_cross_entropy: class counts differ, logits " +
              shape_str(logits.shape()) + " vs labels " +
              shape_str(labels.shape()));
  const int64_t N = logits.size(0), K = logits.size(1);
  auto out =
      make_out({1}, logits.dtype(), "softmax_xent", {logits.impl(), labels.impl()});
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(N * K));
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& z = logits.vals<T>();
    const auto& y = labels.vals<T>();
    double total = 0.0;
    for (int64_t n = 0; n < N; ++n) {
      const T* zn = z.data() + n * K;
      const T* yn = y.data() + n * K;
      double row_sum = 0.0;
      for (int64_t k = 0; k < K; ++k) row_sum += static_cast<double>(yn[k]);
      require(std::abs(row_sum - 1.0) <= 1e-5, ErrorCode::invalid_argument,
              "softmax_cross_entropy: label row " + std::to_string(n) +
                  " sums to " + std::to_string(row_sum) + ", expected 1");
      double m = static_cast<double>(zn[0]);
      for (int64_t k = 1; k < K; ++k)
        m = std::max(m, static_cast<double>(zn[k]));
      double sum_exp = 0.0;
      for (int64_t k = 0; k < K; ++k)
        sum_exp += std::exp(static_cast<double>(zn[k]) - m);
      double lse = std::log(sum_exp);
      for (int64_t k = 0; k < K; ++k) {
        double p = std::exp(static_cast<double>(zn[k]) - m) / sum_exp;
        (*probs)[static_cast<size_t>(n * K + k)] = p;
        total += static_cast<double>(yn[k]) *
                 (lse - (static_cast<double>(zn[k]) - m));
      }
    }
    out->vals<T>()[0] = static_cast<T>(total / static_cast<double>(N));
  };
  if (logits.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto zi = logits.impl(), yi = labels.impl();
    out->backward_fn = [zi, yi, probs, N, K](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const T g = std::get<std::vector<T>>(self.grad)[0];
        if (!zi->requires_grad) return;
        const auto& y = yi->vals<T>();
        auto& dz = zi->grad_buf<T>();
        const double inv_n = 1.0 / static_cast<double>(N);
        for (int64_t i = 0; i < N * K; ++i)
          dz[static_cast<size_t>(i)] += static_cast<T>(
              static_cast<double>(g) * inv_n *
              ((*probs)[static_cast<size_t>(i)] -
               static_cast<double>(y[static_cast<size_t>(i)])));
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor sum_squared_error(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "sum_squared_error");
  require(a.shape() == b.shape(), ErrorCode::shape_mismatch,
          "sum_squared_error: shapes differ, " + shape_str(a.shape()) +
              " vs " + shape_str(b.shape()));
  auto out = make_out({1}, a.dtype(), "sse", {a.impl(), b.impl()});
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& av = a.vals<T>();
    const auto& bv = b.vals<T>();
    double total = 0.0;
    for (size_t i = 0; i < av.size(); ++i) {
      double d = static_cast<double>(av[i]) - static_cast<double>(bv[i]);
      total += d * d;
    }
    out->vals<T>()[0] = static_cast<T>(total);
  };
  if (a.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto ai = a.impl(), bi = b.impl();
    out->backward_fn = [ai, bi](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const T g = std::get<std::vector<T>>(self.grad)[0];
        const auto& av = ai->vals<T>();
        const auto& bv = bi->vals<T>();
        if (ai->requires_grad) {
          auto& da = ai->grad_buf<T>();
          for (size_t i = 0; i < av.size(); ++i)
            da[i] += T(2) * (av[i] - bv[i]) * g;
        }
        if (bi->requires_grad) {
          auto& db = bi->grad_buf<T>();
          for (size_t i = 0; i < av.size(); ++i)
            db[i] -= T(2) * (av[i] - bv[i]) * g;
        }
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_dtype(a, b, "add");
  require(a.shape() == b.shape(), ErrorCode::shape_mismatch,
          "add: shapes differ, " + shape_str(a.shape()) + " vs " +
              shape_str(b.shape()));
  auto out = make_out(a.shape(), a.dtype(), "add", {a.impl(), b.impl()});
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& av = a.vals<T>();
    const auto& bv = b.vals<T>();
    auto& yv = out->vals<T>();
    for (size_t i = 0; i < av.size(); ++i) yv[i] = av[i] + bv[i];
  };
  if (a.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto ai = a.impl(), bi = b.impl();
    out->backward_fn = [ai, bi](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gy = std::get<std::vector<T>>(self.grad);
        if (ai->requires_grad) accumulate(ai->grad_buf<T>(), gy.data(), gy.size());
        if (bi->requires_grad) accumulate(bi->grad_buf<T>(), gy.data(), gy.size());
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor scale(const Tensor& a, double s) {
  auto out = make_out(a.shape(), a.dtype(), "scale", {a.impl()});
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& av = a.vals<T>();
    auto& yv = out->vals<T>();
    for (size_t i = 0; i < av.size(); ++i)
      yv[i] = static_cast<T>(static_cast<double>(av[i]) * s);
  };
  if (a.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto ai = a.impl();
    out->backward_fn = [ai, s](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gy = std::get<std::vector<T>>(self.grad);
        auto& da = ai->grad_buf<T>();
        for (size_t i = 0; i < gy.size(); ++i)
          da[i] += static_cast<T>(static_cast<double>(gy[i]) * s);
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor sum(const Tensor& a) {
  auto out = make_out({1}, a.dtype(), "sum", {a.impl()});
  auto run = [&](auto tag) {
    using T = decltype(tag);
    double total = 0.0;
    for (const T& v : a.vals<T>()) total += static_cast<double>(v);
    out->vals<T>()[0] = static_cast<T>(total);
  };
  if (a.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto ai = a.impl();
    out->backward_fn = [ai](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const T g = std::get<std::vector<T>>(self.grad)[0];
        auto& da = ai->grad_buf<T>();
        for (auto& v : da) v += g;
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  require(shape_numel(shape) == a.numel(), ErrorCode::shape_mismatch,
          "reshape: cannot view " + shape_str(a.shape()) + " as " +
              shape_str(shape));
  auto out = make_out(shape, a.dtype(), "reshape", {a.impl()});
  if (a.dtype() == Dtype::f32)
    out->vals<float>() = a.vals<float>();
  else
    out->vals<double>() = a.vals<double>();
  if (out->requires_grad) {
    auto ai = a.impl();
    out->backward_fn = [ai](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gy = std::get<std::vector<T>>(self.grad);
        accumulate(ai->grad_buf<T>(), gy.data(), gy.size());
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor slice_channels(const Tensor& a, int64_t c0, int64_t c1) {
  require(a.rank() >= 1, ErrorCode::shape_mismatch, "slice_channels: rank 0");
  const int64_t C = a.shape().back();
  require(0 <= c0 && c0 < c1 && c1 <= C, ErrorCode::invalid_argument,
          "slice_channels: range [" + std::to_string(c0) + "," +
              std::to_string(c1) + ") invalid for " + std::to_string(C) +
              " channels");
  Shape out_shape = a.shape();
  out_shape.back() = c1 - c0;
  auto out = make_out(out_shape, a.dtype(), "slice_ch", {a.impl()});
  const int64_t outer = a.numel() / C;
  const int64_t Cs = c1 - c0;
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& av = a.vals<T>();
    auto& yv = out->vals<T>();
    for (int64_t o = 0; o < outer; ++o)
      std::copy(av.data() + o * C + c0, av.data() + o * C + c1,
                yv.data() + o * Cs);
  };
  if (a.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (out->requires_grad) {
    auto ai = a.impl();
    out->backward_fn = [ai, c0, C, Cs, outer](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gy = std::get<std::vector<T>>(self.grad);
        auto& da = ai->grad_buf<T>();
        for (int64_t o = 0; o < outer; ++o)
          for (int64_t c = 0; c < Cs; ++c)
            da[static_cast<size_t>(o * C + c0 + c)] +=
                gy[static_cast<size_t>(o * Cs + c)];
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), ErrorCode::invalid_argument,
          "concat_channels: no inputs");
  const Shape& s0 = parts[0].shape();
  int64_t total_c = 0;
  for (const Tensor& p : parts) {
    check_same_dtype(parts[0], p, "concat_channels");
    require(p.rank() == parts[0].rank(), ErrorCode::shape_mismatch,
            "concat_channels: mixed ranks");
    for (int i = 0; i + 1 < p.rank(); ++i)
      require(p.size(i) == s0[static_cast<size_t>(i)],
              ErrorCode::shape_mismatch,
              "concat_channels: leading dims differ, " + shape_str(s0) +
                  " vs " + shape_str(p.shape()));
    total_c += p.shape().back();
  }
  Shape out_shape = s0;
  out_shape.back() = total_c;
  auto out = std::make_shared<TensorImpl>();
  out->shape = out_shape;
  out->dtype = parts[0].dtype();
  size_t n = static_cast<size_t>(shape_numel(out_shape));
  if (out->dtype == Dtype::f32)
    out->values = std::vector<float>(n);
  else
    out->values = std::vector<double>(n);
  out->op = "concat_ch";
  bool rg = false;
  for (const Tensor& p : parts) rg = rg || p.requires_grad();
  out->requires_grad = rg;
  if (rg)
    for (const Tensor& p : parts) out->parents.push_back(p.impl());
  const int64_t outer = shape_numel(out_shape) / total_c;
  auto run = [&](auto tag) {
    using T = decltype(tag);
    auto& yv = out->vals<T>();
    int64_t off = 0;
    for (const Tensor& p : parts) {
      const int64_t pc = p.shape().back();
      const auto& pv = p.vals<T>();
      for (int64_t o = 0; o < outer; ++o)
        std::copy(pv.data() + o * pc, pv.data() + (o + 1) * pc,
                  yv.data() + o * total_c + off);
      off += pc;
    }
  };
  if (out->dtype == Dtype::f32)
    run(float{});
  else
    run(double{});
  if (rg) {
    std::vector<std::shared_ptr<TensorImpl>> impls;
    std::vector<int64_t> widths;
    for (const Tensor& p : parts) {
      impls.push_back(p.impl());
      widths.push_back(p.shape().back());
    }
    out->backward_fn = [impls, widths, outer, total_c](TensorImpl& self) {
      auto push = [&](auto tag) {
        using T = decltype(tag);
        const auto& gy = std::get<std::vector<T>>(self.grad);
        int64_t off = 0;
        for (size_t pi = 0; pi < impls.size(); ++pi) {
          const int64_t pc = widths[pi];
          if (impls[pi]->requires_grad) {
            auto& dp = impls[pi]->grad_buf<T>();
            for (int64_t o = 0; o < outer; ++o)
              for (int64_t c = 0; c < pc; ++c)
                dp[static_cast<size_t>(o * pc + c)] +=
                    gy[static_cast<size_t>(o * total_c + off + c)];
          }
          off += pc;
        }
      };
      if (self.dtype == Dtype::f32)
        push(float{});
      else
        push(double{});
    };
  }
  return Tensor(out);
}

Tensor detach(const Tensor& a) { return a.detached_copy(); }

void backward(const Tensor& loss) {
  require(loss.defined(), ErrorCode::invalid_argument, "backward: undefined");
  require(loss.numel() == 1, ErrorCode::invalid_argument,
          "backward: loss must be scalar, got " + shape_str(loss.shape()));
  // Iterative post-order DFS: node is appended after all of its parents.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.impl().get(), 0});
  visited.insert(loss.impl().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  for (TensorImpl* n : order) n->clear_grad();
  if (loss.dtype() == Dtype::f32)
    loss.impl()->grad_buf<float>()[0] = 1.0f;
  else
    loss.impl()->grad_buf<double>()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
  }
}

Parameter& ParameterSet::add(const std::string& name, Tensor t,
                             bool trainable) {
  require(find(name) == nullptr, ErrorCode::invalid_argument,
          "parameter name not unique: " + name);
  t.set_requires_grad(trainable);
  items_.push_back(Parameter{name, std::move(t), trainable});
  return items_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : items_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : items_)
    if (p.name == name) return &p;
  return nullptr;
}

Parameter& ParameterSet::at(const std::string& name) {
  Parameter* p = find(name);
  require(p != nullptr, ErrorCode::not_found, "no parameter named " + name);
  return *p;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  const Parameter* p = find(name);
  require(p != nullptr, ErrorCode::not_found, "no parameter named " + name);
  return *p;
}

void ParameterSet::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& p : items_) {
    if (p.name.rfind(prefix, 0) == 0) {
      p.trainable = trainable;
      p.tensor.set_requires_grad(trainable);
    }
  }
}

int64_t ParameterSet::count_trainable() const {
  int64_t n = 0;
  for (const auto& p : items_)
    if (p.trainable) n += p.tensor.numel();
  return n;
}

GradMap collect_gradients(const Tensor& loss, const ParameterSet& params) {
  for (const auto& p : params.items()) p.tensor.impl()->clear_grad();
  backward(loss);
  GradMap out;
  for (const auto& p : params.items()) {
    if (p.trainable && p.tensor.has_grad())
      out.emplace(p.name, p.tensor.grad_tensor());
  }
  return out;
}

void Optimizer::step(const std::vector<Parameter*>& params,
                     const GradMap& grads) {
  for (Parameter* p : params) {
    require(p->trainable, ErrorCode::state,
            "optimizer step on frozen parameter " + p->name);
    auto it = grads.find(p->name);
    require(it != grads.end(), ErrorCode::not_found,
            "missing gradient for trainable parameter " + p->name);
    const Tensor& g = it->second;
    require(g.shape() == p->tensor.shape(), ErrorCode::shape_mismatch,
            "gradient shape " + shape_str(g.shape()) + " does not match " +
                p->name + " " + shape_str(p->tensor.shape()));
    const int64_t n = p->tensor.numel();
    if (cfg_.kind == OptimKind::sgd) {
      for (int64_t i = 0; i < n; ++i)
        p->tensor.set(i, p->tensor.at(i) - cfg_.lr * g.at(i));
      continue;
    }
    MomentState& st = state_[p->name];
    if (st.m.empty()) {
      st.m.assign(static_cast<size_t>(n), 0.0);
      st.v.assign(static_cast<size_t>(n), 0.0);
      st.t = 0;
    }
    require(static_cast<int64_t>(st.m.size()) == n, ErrorCode::state,
            "optimizer state size mismatch for " + p->name);
    st.t += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(st.t));
    for (int64_t i = 0; i < n; ++i) {
      const double gi = g.at(i);
      const size_t si = static_cast<size_t>(i);
      st.m[si] = cfg_.beta1 * st.m[si] + (1.0 - cfg_.beta1) * gi;
      st.v[si] = cfg_.beta2 * st.v[si] + (1.0 - cfg_.beta2) * gi * gi;
      const double mh = st.m[si] / bc1;
      const double vh = st.v[si] / bc2;
      p->tensor.set(i, p->tensor.at(i) - cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps));
    }
  }
}

void init_fan_in_uniform(Tensor& t, int64_t fan_in, Rng& rng) {
  require(fan_in > 0, ErrorCode::invalid_argument, "fan_in must be positive");
  const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
  const int64_t n = t.numel();
  for (int64_t i = 0; i < n; ++i) t.set(i, rng.uniform(-limit, limit));
}

}  // namespace dpif
