// dpif/backbone.cpp

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

#include "dpif/backbone.hpp"

#include <algorithm>
#include <cmath>

namespace dpif {

namespace {

constexpr double kBnEps = 1e-5;

BackboneBlock conv_block(std::string name, int kernel, int out_channels,
                         int stride, bool bn, bool relu,
                         std::string boundary = "") {
  BackboneBlock b;
  b.kind = BackboneBlock::Kind::conv;
  b.name = std::move(name);
  b.boundary = std::move(boundary);
  b.kernel = kernel;
  b.out_channels = out_channels;
  b.stride = stride;
  b.batch_norm = bn;
  b.relu_after = relu;
  return b;
}

BackboneBlock pool_block(std::string name, int window, int stride,
                         Padding pad, std::string boundary = "") {
  BackboneBlock b;
  b.kind = BackboneBlock::Kind::pool;
  b.name = std::move(name);
  b.boundary = std::move(boundary);
  b.window = window;
  b.stride = stride;
  b.pad = pad;
  return b;
}

BackboneBlock bottleneck(std::string name, int width, int out_channels,
                         int stride, std::string boundary) {
  BackboneBlock b;
  b.kind = BackboneBlock::Kind::bottleneck;
  b.name = std::move(name);
  b.boundary = std::move(boundary);
  b.width = width;
  b.out_channels = out_channels;
  b.stride = stride;
  b.batch_norm = true;
  return b;
}

std::vector<BackboneBlock> vgg16_blocks() {
  // Five conv stages with 2/2/3/3/3 convolutions (3x3, stride 1) and a
  // trailing 2x2/2 pool each; channels 64/128/256/512/512.
  std::vector<BackboneBlock> blocks;
  const int stage_convs[5] = {2, 2, 3, 3, 3};
  const int stage_channels[5] = {64, 128, 256, 512, 512};
  for (int s = 0; s < 5; ++s) {
    for (int c = 0; c < stage_convs[s]; ++c) {
      blocks.push_back(conv_block("conv" + std::to_string(s + 1) + "_" +
                                      std::to_string(c + 1),
                                  3, stage_channels[s], 1, false, true));
    }
    std::string pool_name = "block" + std::to_string(s + 1) + "_pool";
    blocks.push_back(pool_block(pool_name, 2, 2, Padding::valid, pool_name));
  }
  return blocks;
}

std::vector<BackboneBlock> resnet50_blocks() {
  // Bottleneck groups 2..5 with 3/4/6/3 units and widths 64/128/256/512.
  // The spatial downsample of groups 2-4 sits at each group's final unit;
  // group 5 grows channels only. This placement fixes the truncation
  // shape ledger for block_2c/3d/4e/4f/5c.
  std::vector<BackboneBlock> blocks;
  blocks.push_back(conv_block("conv1", 7, 64, 2, true, true));
  blocks.push_back(pool_block("pool1", 3, 2, Padding::same));
  struct Group {
    int index, width, out, units;
    bool downsample_last;
  };
  const Group groups[4] = {
      {2, 64, 256, 3, true},
      {3, 128, 512, 4, true},
      {4, 256, 1024, 6, true},
      {5, 512, 2048, 3, false},
  };
  for (const Group& g : groups) {
    for (int u = 0; u < g.units; ++u) {
      std::string name = "block_" + std::to_string(g.index) +
                         std::string(1, static_cast<char>('a' + u));
      int stride = (g.downsample_last && u == g.units - 1) ? 2 : 1;
      blocks.push_back(bottleneck(name, g.width, g.out, stride, name));
    }
  }
  return blocks;
}

std::vector<BackboneBlock> tiny_blocks() {
  // Desk-scale stand-in: three conv/pool stages, 16 -> 32 -> 64 channels,
  // 32x32 input, 4x4x64 output.
  std::vector<BackboneBlock> blocks;
  const int channels[3] = {16, 32, 64};
  for (int s = 0; s < 3; ++s) {
    blocks.push_back(conv_block("conv" + std::to_string(s + 1), 3,
                                channels[s], 1, false, true));
    std::string pool_name = "block" + std::to_string(s + 1) + "_pool";
    blocks.push_back(pool_block(pool_name, 2, 2, Padding::valid, pool_name));
  }
  return blocks;
}

int64_t pool_out(int64_t in, int window, int stride, Padding pad) {
  return conv_out_extent(in, window, stride, pad);
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::vgg16: return "vgg16";
    case Family::resnet50: return "resnet50";
    case Family::tiny: return "tiny";
  }
  return "?";
}

std::optional<Family> family_from_name(const std::string& s) {
  if (s == "vgg16") return Family::vgg16;
  if (s == "resnet50") return Family::resnet50;
  if (s == "tiny") return Family::tiny;
  return std::nullopt;
}

std::vector<std::string> BackboneSpec::truncation_points(Family family) {
  switch (family) {
    case Family::vgg16:
      return {"block2_pool", "block3_pool", "block4_pool", "block5_pool"};
    case Family::resnet50:
      return {"block_2c", "block_3d", "block_4e", "block_4f", "block_5c"};
    case Family::tiny:
      return {"block1_pool", "block2_pool", "block3_pool"};
  }
  return {};
}

std::string BackboneSpec::default_truncation(Family family) {
  switch (family) {
    case Family::vgg16: return "block4_pool";
    case Family::resnet50: return "block_4e";
    case Family::tiny: return "block3_pool";
  }
  return "";
}

BackboneSpec BackboneSpec::make(Family family, const std::string& truncation) {
  auto points = truncation_points(family);
  require(std::find(points.begin(), points.end(), truncation) != points.end(),
          ErrorCode::invalid_argument,
          "truncation '" + truncation + "' is not a boundary of " +
              family_name(family));
  BackboneSpec spec;
  spec.family = family;
  spec.truncation = truncation;
  spec.input_size = family == Family::tiny ? 32 : 224;
  std::vector<BackboneBlock> all;
  switch (family) {
    case Family::vgg16: all = vgg16_blocks(); break;
    case Family::resnet50: all = resnet50_blocks(); break;
    case Family::tiny: all = tiny_blocks(); break;
  }
  for (const auto& b : all) {
    spec.blocks.push_back(b);
    if (b.boundary == truncation) break;
  }
  return spec;
}

Shape BackboneSpec::output_shape() const {
  int64_t h = input_size, w = input_size, c = 3;
  for (const auto& b : blocks) {
    switch (b.kind) {
      case BackboneBlock::Kind::conv:
        h = conv_out_extent(h, b.kernel, b.stride, Padding::same);
        w = conv_out_extent(w, b.kernel, b.stride, Padding::same);
        c = b.out_channels;
        break;
      case BackboneBlock::Kind::pool:
        h = pool_out(h, b.window, b.stride, b.pad);
        w = pool_out(w, b.window, b.stride, b.pad);
        break;
      case BackboneBlock::Kind::bottleneck:
        h = conv_out_extent(h, 1, b.stride, Padding::same);
        w = conv_out_extent(w, 1, b.stride, Padding::same);
        c = b.out_channels;
        break;
    }
  }
  return {1, h, w, c};
}

std::vector<std::pair<std::string, Shape>> BackboneSpec::boundary_shapes()
    const {
  std::vector<std::pair<std::string, Shape>> out;
  for (const auto& name : truncation_points(family)) {
    BackboneSpec cut = make(family, name);
    Shape s = cut.output_shape();
    out.emplace_back(name, Shape{s[1], s[2], s[3]});
    if (name == truncation) break;
  }
  return out;
}

namespace {

/// Inference-mode batch norm; graph-free (backbones are frozen).
Tensor bn_inference(const Tensor& x, const Tensor& mean, const Tensor& var,
                    const Tensor& scale, const Tensor& shift) {
  const int64_t C = x.shape().back();
  require(mean.numel() == C && var.numel() == C && scale.numel() == C &&
              shift.numel() == C,
          ErrorCode::shape_mismatch, "batch norm stats do not match channels");
  Tensor out = Tensor::zeros(x.shape(), x.dtype());
  const int64_t outer = x.numel() / C;
  std::vector<double> k(static_cast<size_t>(C)), b(static_cast<size_t>(C));
  for (int64_t c = 0; c < C; ++c) {
    double v = var.at(c);
    require(v >= 0.0, ErrorCode::invalid_argument,
            "batch norm variance must be >= 0");
    double inv = 1.0 / std::sqrt(v + kBnEps);
    k[static_cast<size_t>(c)] = scale.at(c) * inv;
    b[static_cast<size_t>(c)] = shift.at(c) - mean.at(c) * scale.at(c) * inv;
  }
  auto run = [&](auto tag) {
    using T = decltype(tag);
    const auto& xv = x.vals<T>();
    auto& yv = out.vals<T>();
    for (int64_t o = 0; o < outer; ++o)
      for (int64_t c = 0; c < C; ++c) {
        size_t i = static_cast<size_t>(o * C + c);
        yv[i] = static_cast<T>(static_cast<double>(xv[i]) *
                                   k[static_cast<size_t>(c)] +
                               b[static_cast<size_t>(c)]);
      }
  };
  if (x.dtype() == Dtype::f32)
    run(float{});
  else
    run(double{});
  return out;
}

void conv_param_shapes(const std::string& prefix, int kernel, int64_t ci,
                       int64_t co, bool bn,
                       std::vector<std::pair<std::string, Shape>>* out) {
  out->emplace_back(prefix + ".kernel", Shape{kernel, kernel, ci, co});
  out->emplace_back(prefix + ".bias", Shape{co});
  if (bn) {
    out->emplace_back(prefix + ".bn.mean", Shape{co});
    out->emplace_back(prefix + ".bn.var", Shape{co});
    out->emplace_back(prefix + ".bn.scale", Shape{co});
    out->emplace_back(prefix + ".bn.shift", Shape{co});
  }
}

/// Enumerates every parameter (name, shape) of a layer list, in forward
/// order.
std::vector<std::pair<std::string, Shape>> spec_param_shapes(
    const BackboneSpec& spec) {
  std::vector<std::pair<std::string, Shape>> out;
  int64_t c = 3;
  for (const auto& b : spec.blocks) {
    const std::string prefix = "backbone." + b.name;
    switch (b.kind) {
      case BackboneBlock::Kind::conv:
        conv_param_shapes(prefix, b.kernel, c, b.out_channels, b.batch_norm,
                          &out);
        c = b.out_channels;
        break;
      case BackboneBlock::Kind::pool:
        break;
      case BackboneBlock::Kind::bottleneck: {
        bool project = (c != b.out_channels) || b.stride != 1;
        conv_param_shapes(prefix + ".conv1", 1, c, b.width, true, &out);
        conv_param_shapes(prefix + ".conv2", 3, b.width, b.width, true, &out);
        conv_param_shapes(prefix + ".conv3", 1, b.width, b.out_channels, true,
                          &out);
        if (project)
          conv_param_shapes(prefix + ".proj", 1, c, b.out_channels, true,
                            &out);
        c = b.out_channels;
        break;
      }
    }
  }
  return out;
}

}  // namespace

Backbone Backbone::build(const BackboneSpec& spec, const WeightStore& weights) {
  Backbone bb;
  bb.spec_ = spec;
  for (const auto& [name, shape] : spec_param_shapes(spec)) {
    const Tensor* t = weights.find(name);
    require(t != nullptr, ErrorCode::not_found,
            "weight store is missing layer " + name);
    require(t->shape() == shape, ErrorCode::record_mismatch,
            "layer " + name + " expects shape " + shape_str(shape) +
                " but store has " + shape_str(t->shape()));
    bb.params_.add(name, t->detached_copy(), /*trainable=*/false);
  }
  return bb;
}

Backbone Backbone::build_seeded(const BackboneSpec& spec, uint64_t seed) {
  Backbone bb;
  bb.spec_ = spec;
  Rng rng = Rng::keyed(seed, "backbone.init");
  for (const auto& [name, shape] : spec_param_shapes(spec)) {
    Tensor t = Tensor::zeros(shape);
    if (name.ends_with(".kernel")) {
      int64_t fan_in = shape[0] * shape[1] * shape[2];
      init_fan_in_uniform(t, fan_in, rng);
    } else if (name.ends_with(".bn.var") || name.ends_with(".bn.scale")) {
      t = Tensor::full(shape, 1.0);  // identity stats
    }
    bb.params_.add(name, std::move(t), /*trainable=*/false);
  }
  return bb;
}

int64_t Backbone::param_count() const {
  int64_t n = 0;
  for (const auto& p : params_.items()) n += p.tensor.numel();
  return n;
}

WeightStore Backbone::weights() const {
  WeightStore store;
  for (const auto& p : params_.items()) store.put(p.name, p.tensor.detached_copy());
  store.metadata().provenance = std::string("backbone ") +
                                family_name(spec_.family) + " @ " +
                                spec_.truncation;
  return store;
}

Tensor Backbone::forward_impl(
    const Tensor& images,
    std::vector<std::pair<std::string, Shape>>* ledger) const {
  require(images.rank() == 4 && images.size(3) == 3, ErrorCode::shape_mismatch,
          "backbone expects [N,H,W,3] input, got " + shape_str(images.shape()));
  require(images.size(1) == spec_.input_size &&
              images.size(2) == spec_.input_size,
          ErrorCode::shape_mismatch,
          "backbone " + std::string(family_name(spec_.family)) + " expects " +
              std::to_string(spec_.input_size) + "x" +
              std::to_string(spec_.input_size) + " input, got " +
              shape_str(images.shape()));
  Tensor x = detach(images);
  auto conv_fwd = [&](const Tensor& in, const std::string& prefix, int stride,
                      bool bn, bool relu) {
    Tensor y = conv2d(in, params_.at(prefix + ".kernel").tensor,
                      params_.at(prefix + ".bias").tensor, stride,
                      Padding::same);
    if (bn)
      y = bn_inference(y, params_.at(prefix + ".bn.mean").tensor,
                       params_.at(prefix + ".bn.var").tensor,
                       params_.at(prefix + ".bn.scale").tensor,
                       params_.at(prefix + ".bn.shift").tensor);
    if (relu) y = activation(y, Act::relu);
    return y;
  };
  int64_t in_channels = 3;
  for (const auto& b : spec_.blocks) {
    const std::string prefix = "backbone." + b.name;
    switch (b.kind) {
      case BackboneBlock::Kind::conv:
        x = conv_fwd(x, prefix, b.stride, b.batch_norm, b.relu_after);
        in_channels = b.out_channels;
        break;
      case BackboneBlock::Kind::pool:
        x = maxpool2d(x, b.window, b.stride, b.pad);
        break;
      case BackboneBlock::Kind::bottleneck: {
        bool project = (in_channels != b.out_channels) || b.stride != 1;
        Tensor y = conv_fwd(x, prefix + ".conv1", b.stride, true, true);
        y = conv_fwd(y, prefix + ".conv2", 1, true, true);
        y = conv_fwd(y, prefix + ".conv3", 1, true, false);
        Tensor sc = project ? conv_fwd(x, prefix + ".proj", b.stride, true,
                                       false)
                            : x;
        x = activation(add(y, sc), Act::relu);
        in_channels = b.out_channels;
        break;
      }
    }
    if (ledger && !b.boundary.empty()) {
      Shape s = x.shape();
      ledger->emplace_back(b.boundary, Shape{s[1], s[2], s[3]});
    }
  }
  return x;
}

Tensor Backbone::forward(const Tensor& images) const {
  return forward_impl(images, nullptr);
}

std::vector<std::pair<std::string, Shape>> truncation_sweep(
    Family family, const Tensor& images) {
  require(family == Family::vgg16 || family == Family::resnet50,
          ErrorCode::invalid_argument,
          "truncation sweep is defined only for vgg16 and resnet50");
  auto points = BackboneSpec::truncation_points(family);
  BackboneSpec spec = BackboneSpec::make(family, points.back());
  Backbone bb = Backbone::build_seeded(spec, 0);
  std::vector<std::pair<std::string, Shape>> ledger;
  bb.forward_impl(images, &ledger);
  std::vector<std::pair<std::string, Shape>> rows;
  for (const auto& name : points)
    for (const auto& [n, s] : ledger)
      if (n == name) rows.emplace_back(n, s);
  return rows;
}

}  // namespace dpif
