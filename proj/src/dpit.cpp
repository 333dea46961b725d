// dpif/dpit.cpp

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

#include "dpif/dpit.hpp"

namespace dpif {

namespace {

Tensor conv1x1_kernel(int64_t ci, int64_t co, Dtype dt = Dtype::f32) {
  return Tensor::zeros({1, 1, ci, co}, dt);
}

}  // namespace

DpitModel::DpitModel(std::shared_ptr<const Backbone> backbone, HeadConfig cfg,
                     uint64_t seed)
    : backbone_(std::move(backbone)), cfg_(cfg) {
  require(cfg_.in_channels > 0 && cfg_.in_channels % 2 == 0,
          ErrorCode::invalid_argument,
          "head input channels must be even, got " +
              std::to_string(cfg_.in_channels));
  const int64_t c_half = cfg_.in_channels / 2;
  require(c_half % (2 * cfg_.groups) == 0, ErrorCode::invalid_argument,
          std::to_string(cfg_.groups) + " filter groups do not divide " +
              std::to_string(c_half) + " compressed channels");
  require(cfg_.num_classes >= 1, ErrorCode::invalid_argument,
          "classifier needs at least one class");
  require(cfg_.embed_dim >= 1, ErrorCode::invalid_argument,
          "embedding size must be positive");
  const int64_t c_quarter = c_half / 2;
  const int64_t flat = static_cast<int64_t>(cfg_.spatial_h) * cfg_.spatial_w *
                       c_quarter;

  Rng rng = Rng::keyed(seed, "head.init");
  auto add_conv = [&](const std::string& name, int64_t ci, int64_t co,
                      bool zero_init) {
    Tensor k = conv1x1_kernel(ci, co);
    if (!zero_init) init_fan_in_uniform(k, ci, rng);
    params_.add("head." + name + ".kernel", std::move(k));
    params_.add("head." + name + ".bias", Tensor::zeros({co}));
  };

  add_conv("compress", cfg_.in_channels, c_half, false);
  // Residual blocks start as exact identities: the final layer of each
  // block is zero so its activation contributes nothing, while the inner
  // layers carry gradient from the first step.
  add_conv("f1", c_half, cfg_.f_inner, false);
  add_conv("f2", cfg_.f_inner, cfg_.f_inner, false);
  add_conv("f3", cfg_.f_inner, c_half, true);
  add_conv("g1", c_half, c_half, false);
  add_conv("g2", c_half, c_half, true);

  const int64_t ci_g = c_half / cfg_.groups;
  const int64_t co_g = c_quarter / cfg_.groups;
  for (int g = 0; g < cfg_.groups; ++g) {
    Tensor k = conv1x1_kernel(ci_g, co_g);
    init_fan_in_uniform(k, ci_g, rng);
    params_.add("head.grouped.kernel" + std::to_string(g), std::move(k));
  }
  params_.add("head.grouped.bias", Tensor::zeros({c_quarter}));

  Tensor ew = Tensor::zeros({flat, cfg_.embed_dim});
  init_fan_in_uniform(ew, flat, rng);
  params_.add("head.embed.weight", std::move(ew));
  params_.add("head.embed.bias", Tensor::zeros({cfg_.embed_dim}));

  Tensor cw = Tensor::zeros({cfg_.embed_dim, cfg_.num_classes});
  init_fan_in_uniform(cw, cfg_.embed_dim, rng);
  params_.add("head.classifier.weight", std::move(cw));
  params_.add("head.classifier.bias", Tensor::zeros({cfg_.num_classes}));
}

DpitModel DpitModel::build(std::shared_ptr<const Backbone> backbone,
                           int embed_dim, int groups, int f_inner, Act f_act,
                           Act g_act, int num_classes, uint64_t seed) {
  Shape out = backbone->output_shape();
  HeadConfig cfg;
  cfg.in_channels = static_cast<int>(out[3]);
  cfg.spatial_h = static_cast<int>(out[1]);
  cfg.spatial_w = static_cast<int>(out[2]);
  cfg.embed_dim = embed_dim;
  cfg.groups = groups;
  cfg.f_inner = f_inner;
  cfg.f_act = f_act;
  cfg.g_act = g_act;
  cfg.num_classes = num_classes;
  return DpitModel(std::move(backbone), cfg, seed);
}

Tensor DpitModel::compress(const Tensor& xm) const {
  require(xm.rank() == 4 && xm.size(3) == cfg_.in_channels,
          ErrorCode::shape_mismatch,
          "compress expects " + std::to_string(cfg_.in_channels) +
              " channels, got " + shape_str(xm.shape()));
  Tensor y = conv2d(xm, params_.at("head.compress.kernel").tensor,
                    params_.at("head.compress.bias").tensor, 1, Padding::same);
  return activation(y, Act::tanh);
}

Tensor DpitModel::dpit_f(const Tensor& h) const {
  auto layer = [&](const Tensor& z, const std::string& name) {
    Tensor y = conv2d(z, params_.at("head." + name + ".kernel").tensor,
                      params_.at("head." + name + ".bias").tensor, 1,
                      Padding::same);
    return activation(y, cfg_.f_act);
  };
  Tensor y = layer(layer(layer(h, "f1"), "f2"), "f3");
  return add(y, h);
}

Tensor DpitModel::dpit_g(const Tensor& f) const {
  auto layer = [&](const Tensor& z, const std::string& name) {
    Tensor y = conv2d(z, params_.at("head." + name + ".kernel").tensor,
                      params_.at("head." + name + ".bias").tensor, 1,
                      Padding::same);
    return activation(y, cfg_.g_act);
  };
  Tensor y = layer(layer(f, "g1"), "g2");
  return add(y, f);
}

Tensor DpitModel::grouped_map(const Tensor& t) const {
  std::vector<Tensor> kernels;
  kernels.reserve(static_cast<size_t>(cfg_.groups));
  for (int g = 0; g < cfg_.groups; ++g)
    kernels.push_back(
        params_.at("head.grouped.kernel" + std::to_string(g)).tensor);
  Tensor y = grouped_conv2d(t, kernels, params_.at("head.grouped.bias").tensor,
                            cfg_.groups);
  return activation(y, Act::relu);
}

Tensor DpitModel::embed(const Tensor& psi) const {
  const Tensor& w = params_.at("head.embed.weight").tensor;
  Tensor flat = reshape(psi, {psi.size(0), w.size(0)});
  return dense(flat, w, params_.at("head.embed.bias").tensor);
}

Tensor DpitModel::visible_head(const Tensor& xm) const {
  return embed(grouped_map(compress(xm)));
}

Tensor DpitModel::thermal_head(const Tensor& xm) const {
  return embed(grouped_map(dpit_g(dpit_f(compress(xm)))));
}

Tensor DpitModel::embed_visible(const Tensor& images) const {
  require(backbone_ != nullptr, ErrorCode::state,
          "model was assembled without a backbone");
  return visible_head(backbone_->forward(images));
}

Tensor DpitModel::embed_thermal(const Tensor& images) const {
  require(backbone_ != nullptr, ErrorCode::state,
          "model was assembled without a backbone");
  return thermal_head(backbone_->forward(images));
}

Tensor DpitModel::classify(const Tensor& embedding) const {
  require(embedding.rank() == 2 && embedding.size(1) == cfg_.embed_dim,
          ErrorCode::shape_mismatch,
          "classifier expects [N," + std::to_string(cfg_.embed_dim) +
              "] embeddings, got " + shape_str(embedding.shape()));
  return dense(embedding, params_.at("head.classifier.weight").tensor,
               params_.at("head.classifier.bias").tensor);
}

int64_t DpitModel::count_trainable() const {
  return params_.count_trainable();
}

void DpitModel::set_classifier_trainable(bool trainable) {
  params_.set_trainable("head.classifier.", trainable);
}

void DpitModel::set_fg_trainable(bool trainable) {
  for (const char* p : {"head.f1.", "head.f2.", "head.f3.", "head.g1.",
                        "head.g2."})
    params_.set_trainable(p, trainable);
}

namespace {
std::vector<std::string> shared_names(const HeadConfig& cfg) {
  std::vector<std::string> names = {"head.compress.kernel",
                                    "head.compress.bias"};
  for (int g = 0; g < cfg.groups; ++g)
    names.push_back("head.grouped.kernel" + std::to_string(g));
  names.push_back("head.grouped.bias");
  names.push_back("head.embed.weight");
  names.push_back("head.embed.bias");
  return names;
}
std::vector<std::string> fg_names() {
  std::vector<std::string> names;
  for (const char* l : {"f1", "f2", "f3", "g1", "g2"}) {
    names.push_back(std::string("head.") + l + ".kernel");
    names.push_back(std::string("head.") + l + ".bias");
  }
  return names;
}
}  // namespace

std::vector<Parameter*> DpitModel::shared_params() {
  std::vector<Parameter*> out;
  for (const auto& n : shared_names(cfg_)) out.push_back(&params_.at(n));
  return out;
}

std::vector<Parameter*> DpitModel::fg_params() {
  std::vector<Parameter*> out;
  for (const auto& n : fg_names()) out.push_back(&params_.at(n));
  return out;
}

std::vector<Parameter*> DpitModel::classifier_params() {
  return {&params_.at("head.classifier.weight"),
          &params_.at("head.classifier.bias")};
}

std::vector<Parameter*> DpitModel::phase1_params() {
  auto out = shared_params();
  for (auto* p : classifier_params()) out.push_back(p);
  return out;
}

std::vector<Parameter*> DpitModel::phase2_params() {
  auto out = shared_params();
  for (auto* p : fg_params()) out.push_back(p);
  return out;
}

std::vector<std::string> DpitModel::visible_param_names() const {
  return shared_names(cfg_);
}

std::vector<std::string> DpitModel::thermal_param_names() const {
  auto names = shared_names(cfg_);
  for (const auto& n : fg_names()) names.push_back(n);
  return names;
}

WeightStore DpitModel::head_weights() const {
  WeightStore store;
  for (const auto& p : params_.items())
    store.put(p.name, p.tensor.detached_copy());
  return store;
}

void DpitModel::load_head_weights(const WeightStore& store) {
  for (auto& p : params_.items()) {
    const Tensor* t = store.find(p.name);
    require(t != nullptr, ErrorCode::not_found,
            "checkpoint is missing parameter " + p.name);
    require(t->shape() == p.tensor.shape(), ErrorCode::record_mismatch,
            "parameter " + p.name + " expects " + shape_str(p.tensor.shape()) +
                " but checkpoint has " + shape_str(t->shape()));
    bool trainable = p.trainable;
    p.tensor = t->detached_copy();
    p.tensor.set_requires_grad(trainable);
  }
}

}  // namespace dpif
