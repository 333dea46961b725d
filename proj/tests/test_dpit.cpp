// tests/test_dpit.cpp

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

#include <cmath>

#include "doctest.h"
#include "dpif/dpit.hpp"
#include "dpif/losses.hpp"
#include "oracles.hpp"

using namespace dpif;

namespace {

std::shared_ptr<const Backbone> tiny_backbone(uint64_t seed = 42) {
  return std::make_shared<const Backbone>(Backbone::build_seeded(
      BackboneSpec::make(Family::tiny, "block3_pool"), seed));
}

DpitModel tiny_model(int embed_dim = 64, int k = 5, uint64_t seed = 1,
                     Act f_act = Act::tanh, Act g_act = Act::relu) {
  return DpitModel::build(tiny_backbone(), embed_dim, 2, 200, f_act, g_act, k,
                          seed);
}

/// Head without a backbone for pure feature-level math.
DpitModel head_only(HeadConfig cfg, uint64_t seed = 1) {
  return DpitModel(nullptr, cfg, seed);
}

Tensor random_features(const Shape& shape, uint64_t seed) {
  Rng rng(seed);
  Tensor t = Tensor::zeros(shape);
  for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(-1.0, 1.0));
  return t;
}

void zero_params(DpitModel& model, const std::string& prefix) {
  for (auto& p : model.params().items()) {
    if (p.name.rfind(prefix, 0) == 0)
      for (int64_t i = 0; i < p.tensor.numel(); ++i) p.tensor.set(i, 0.0);
  }
}

}  // namespace

TEST_CASE("compress halves channels, bounds outputs, rejects odd widths") {
  HeadConfig cfg;
  cfg.in_channels = 8;
  cfg.spatial_h = cfg.spatial_w = 3;
  cfg.embed_dim = 6;
  cfg.num_classes = 3;
  DpitModel model = head_only(cfg);
  Tensor x = random_features({2, 3, 3, 8}, 11);
  Tensor h = model.compress(x);
  REQUIRE(h.shape() == Shape{2, 3, 3, 4});
  for (int64_t i = 0; i < h.numel(); ++i) {
    CHECK(h.at(i) > -1.0);
    CHECK(h.at(i) < 1.0);
  }
  zero_params(model, "head.compress");
  Tensor hz = model.compress(x);
  for (int64_t i = 0; i < hz.numel(); ++i) CHECK(hz.at(i) == 0.0);

  HeadConfig odd = cfg;
  odd.in_channels = 7;
  CHECK_THROWS_AS(head_only(odd), Error);
}

TEST_CASE("compress carries the full-scale 1024 -> 512 projection") {
  HeadConfig cfg;
  cfg.in_channels = 1024;
  cfg.spatial_h = cfg.spatial_w = 14;
  cfg.embed_dim = 256;
  cfg.num_classes = 10;
  DpitModel model = head_only(cfg);
  CHECK(model.params().at("head.compress.kernel").tensor.shape() ==
        Shape{1, 1, 1024, 512});
  Tensor x = random_features({1, 14, 14, 1024}, 3);
  CHECK(model.compress(x).shape() == Shape{1, 14, 14, 512});
}

TEST_CASE("first residual block is an exact identity at zero parameters") {
  HeadConfig cfg;
  cfg.in_channels = 8;
  cfg.spatial_h = cfg.spatial_w = 4;
  cfg.embed_dim = 6;
  cfg.num_classes = 3;
  DpitModel model = head_only(cfg);
  zero_params(model, "head.f");
  Tensor h = random_features({2, 4, 4, 4}, 5);
  Tensor f = model.dpit_f(h);
  REQUIRE(f.shape() == h.shape());
  for (int64_t i = 0; i < h.numel(); ++i) CHECK(f.at(i) == h.at(i));
}

TEST_CASE("first residual block uses the 200-wide inner channel trace") {
  HeadConfig cfg;
  cfg.in_channels = 1024;  // compressed width 512
  cfg.spatial_h = cfg.spatial_w = 2;
  cfg.embed_dim = 8;
  cfg.num_classes = 3;
  DpitModel model = head_only(cfg);
  CHECK(model.params().at("head.f1.kernel").tensor.shape() ==
        Shape{1, 1, 512, 200});
  CHECK(model.params().at("head.f2.kernel").tensor.shape() ==
        Shape{1, 1, 200, 200});
  CHECK(model.params().at("head.f3.kernel").tensor.shape() ==
        Shape{1, 1, 200, 512});
}

TEST_CASE("second residual block is an exact identity at zero parameters") {
  HeadConfig cfg;
  cfg.in_channels = 8;
  cfg.spatial_h = cfg.spatial_w = 4;
  cfg.embed_dim = 6;
  cfg.num_classes = 3;
  DpitModel model = head_only(cfg);
  zero_params(model, "head.g");
  Tensor f = random_features({2, 4, 4, 4}, 6);
  Tensor g = model.dpit_g(f);
  for (int64_t i = 0; i < f.numel(); ++i) CHECK(g.at(i) == f.at(i));
}

TEST_CASE("all four activation combos build and stay finite") {
  for (Act fa : {Act::tanh, Act::relu}) {
    for (Act ga : {Act::tanh, Act::relu}) {
      DpitModel model = tiny_model(16, 4, 9, fa, ga);
      Tensor x = random_features({2, 4, 4, 64}, 10);
      Tensor emb = model.thermal_head(x);
      CHECK(emb.shape() == Shape{2, 16});
      CHECK(emb.all_finite());
    }
  }
}

TEST_CASE("grouped map halves channels and clamps at zero") {
  HeadConfig cfg;
  cfg.in_channels = 8;
  cfg.spatial_h = cfg.spatial_w = 4;
  cfg.embed_dim = 6;
  cfg.num_classes = 3;
  DpitModel model = head_only(cfg);
  Tensor t = random_features({2, 4, 4, 4}, 8);
  Tensor psi = model.grouped_map(t);
  REQUIRE(psi.shape() == Shape{2, 4, 4, 2});
  for (int64_t i = 0; i < psi.numel(); ++i) CHECK(psi.at(i) >= 0.0);
  CHECK_THROWS_AS(model.grouped_map(random_features({2, 4, 4, 6}, 1)), Error);
}

TEST_CASE("single-group head equals a plain convolution") {
  HeadConfig cfg;
  cfg.in_channels = 8;
  cfg.spatial_h = cfg.spatial_w = 4;
  cfg.embed_dim = 6;
  cfg.groups = 1;
  cfg.num_classes = 3;
  DpitModel model = head_only(cfg);
  Tensor t = random_features({1, 4, 4, 4}, 12);
  Tensor via_head = model.grouped_map(t);
  Tensor direct = activation(
      conv2d(t, model.params().at("head.grouped.kernel0").tensor,
             model.params().at("head.grouped.bias").tensor, 1, Padding::same),
      Act::relu);
  for (int64_t i = 0; i < direct.numel(); ++i)
    CHECK(via_head.vals<float>()[static_cast<size_t>(i)] ==
          direct.vals<float>()[static_cast<size_t>(i)]);
}

TEST_CASE("embedding projection shape and determinism") {
  DpitModel model = tiny_model(256, 5);
  Tensor x = random_features({2, 4, 4, 64}, 20);
  Tensor emb = model.visible_head(x);
  REQUIRE(emb.shape() == Shape{2, 256});
  Tensor again = model.visible_head(x);
  for (int64_t i = 0; i < emb.numel(); ++i)
    CHECK(emb.vals<float>()[static_cast<size_t>(i)] ==
          again.vals<float>()[static_cast<size_t>(i)]);
}

TEST_CASE("default activation combo is tanh for F and relu for G") {
  HeadConfig cfg;
  CHECK(cfg.f_act == Act::tanh);
  CHECK(cfg.g_act == Act::relu);
}

TEST_CASE("full-scale head walks the reference shape chain") {
  HeadConfig cfg;
  cfg.in_channels = 1024;
  cfg.spatial_h = cfg.spatial_w = 14;
  cfg.embed_dim = 256;
  cfg.num_classes = 12;
  DpitModel model = head_only(cfg, 2);
  Tensor xm = random_features({1, 14, 14, 1024}, 55);
  Tensor h = model.compress(xm);
  CHECK(h.shape() == Shape{1, 14, 14, 512});
  Tensor f = model.dpit_f(h);
  CHECK(f.shape() == Shape{1, 14, 14, 512});
  Tensor g = model.dpit_g(f);
  CHECK(g.shape() == Shape{1, 14, 14, 512});
  Tensor psi = model.grouped_map(g);
  CHECK(psi.shape() == Shape{1, 14, 14, 256});
  Tensor emb = model.embed(psi);
  CHECK(emb.shape() == Shape{1, 256});
  CHECK(model.classify(emb).shape() == Shape{1, 12});
}

TEST_CASE("full-scale embedding projection parameter total") {
  HeadConfig cfg;
  cfg.in_channels = 1024;
  cfg.spatial_h = cfg.spatial_w = 14;
  cfg.embed_dim = 256;
  cfg.num_classes = 10;
  DpitModel model = head_only(cfg);
  const Tensor& w = model.params().at("head.embed.weight").tensor;
  const Tensor& b = model.params().at("head.embed.bias").tensor;
  CHECK(w.shape() == Shape{14 * 14 * 256, 256});
  CHECK(w.numel() + b.numel() == 12845312);
}

TEST_CASE("shared parameters drive both streams") {
  DpitModel model = tiny_model(16, 4, 33);
  Tensor x = random_features({1, 4, 4, 64}, 34);
  Tensor v0 = model.visible_head(x);
  Tensor t0 = model.thermal_head(x);
  Tensor& ck = model.params().at("head.compress.kernel").tensor;
  ck.set(0, ck.at(0) + 0.5);
  Tensor v1 = model.visible_head(x);
  Tensor t1 = model.thermal_head(x);
  bool v_changed = false, t_changed = false;
  for (int64_t i = 0; i < v0.numel(); ++i)
    if (v0.at(i) != v1.at(i)) v_changed = true;
  for (int64_t i = 0; i < t0.numel(); ++i)
    if (t0.at(i) != t1.at(i)) t_changed = true;
  CHECK(v_changed);
  CHECK(t_changed);
}

TEST_CASE("residual-identity initialization aligns the two streams") {
  // Default init zeroes each block's final layer, so F and G open as
  // exact identities and the streams coincide on identical input.
  DpitModel model = tiny_model(32, 4, 77);
  Tensor x = random_features({2, 4, 4, 64}, 78);
  Tensor v = model.visible_head(x);
  Tensor t = model.thermal_head(x);
  for (int64_t i = 0; i < v.numel(); ++i)
    CHECK(v.vals<float>()[static_cast<size_t>(i)] ==
          t.vals<float>()[static_cast<size_t>(i)]);
  // The stronger all-zero setting keeps the property too.
  zero_params(model, "head.f");
  zero_params(model, "head.g");
  Tensor v2 = model.visible_head(x);
  Tensor t2 = model.thermal_head(x);
  for (int64_t i = 0; i < v2.numel(); ++i)
    CHECK(v2.vals<float>()[static_cast<size_t>(i)] ==
          t2.vals<float>()[static_cast<size_t>(i)]);
}

TEST_CASE("thermal path carries exactly ten more parameter tensors") {
  DpitModel model = tiny_model();
  auto visible = model.visible_param_names();
  auto thermal = model.thermal_param_names();
  CHECK(visible.size() == 7);  // compress 2 + grouped 3 + embed 2
  CHECK(thermal.size() == visible.size() + 10);
  int f_tensors = 0, g_tensors = 0;
  for (const auto& n : thermal) {
    if (n.rfind("head.f", 0) == 0) ++f_tensors;
    if (n.rfind("head.g", 0) == 0 && n.rfind("head.grouped", 0) != 0)
      ++g_tensors;
  }
  CHECK(f_tensors == 6);
  CHECK(g_tensors == 4);
}

TEST_CASE("classifier: uniform softmax at zero weights, frozen in phase 2") {
  const int K = 7;
  DpitModel model = tiny_model(16, K, 3);
  zero_params(model, "head.classifier");
  Tensor x = random_features({3, 4, 4, 64}, 4);
  Tensor emb = model.visible_head(x);
  Tensor logits = model.classify(emb);
  Tensor y = one_hot({1, 3, 5}, K);
  Tensor loss = softmax_cross_entropy(logits, y);
  CHECK(loss.at(0) == doctest::Approx(std::log(K)).epsilon(1e-6));
  CHECK_THROWS_AS(model.classify(random_features({1, 9}, 5)), Error);

  model.set_classifier_trainable(false);
  Tensor loss2 = softmax_cross_entropy(model.classify(model.visible_head(x)), y);
  GradMap grads = collect_gradients(loss2, model.params());
  CHECK(grads.count("head.classifier.weight") == 0);
  CHECK(grads.count("head.classifier.bias") == 0);
  CHECK(grads.count("head.compress.kernel") == 1);
}

TEST_CASE("count_trainable matches an independent enumeration") {
  const int d = 16, K = 4;
  DpitModel model = tiny_model(d, K);
  // tiny backbone output 4x4x64: compress 64->32, F 32->200->200->32,
  // G 32->32 twice, grouped 32->16 (2 groups), embed 4*4*16 -> d, cls d->K.
  int64_t expected = 0;
  expected += 64 * 32 + 32;                          // compress
  expected += 32 * 200 + 200;                        // f1
  expected += 200 * 200 + 200;                       // f2
  expected += 200 * 32 + 32;                         // f3
  expected += 2 * (32 * 32 + 32);                    // g1, g2
  expected += 2 * (16 * 8) + 16;                     // grouped kernels + bias
  expected += (4 * 4 * 16) * d + d;                  // embedding
  expected += d * K + K;                             // classifier
  CHECK(model.count_trainable() == expected);
  // Enumeration oracle: walk tensors and sum extents.
  int64_t walked = 0;
  for (const auto& p : model.params().items())
    if (p.trainable) walked += p.tensor.numel();
  CHECK(model.count_trainable() == walked);
  model.set_classifier_trainable(false);
  CHECK(model.count_trainable() == expected - (d * K + K));
}

TEST_CASE("full configuration lands within 5% of the reference 14.1M") {
  HeadConfig cfg;
  cfg.in_channels = 1024;
  cfg.spatial_h = cfg.spatial_w = 14;
  cfg.embed_dim = 256;
  cfg.num_classes = 295;
  DpitModel model = head_only(cfg);
  double count = static_cast<double>(model.count_trainable());
  CHECK(std::abs(count - 14.1e6) / 14.1e6 <= 0.05);
}

TEST_CASE("head gradients match finite differences end to end") {
  HeadConfig cfg;
  cfg.in_channels = 8;
  cfg.spatial_h = cfg.spatial_w = 4;
  cfg.f_inner = 5;
  cfg.embed_dim = 4;
  cfg.num_classes = 3;
  DpitModel model64 = head_only(cfg, 21);
  // Randomize everything (zero-init layers included) and lift to f64 so
  // finite differences have headroom and no relu kinks sit exactly at 0.
  Rng rng(91);
  for (auto& p : model64.params().items()) {
    Tensor t = Tensor::zeros(p.tensor.shape(), Dtype::f64);
    for (int64_t i = 0; i < t.numel(); ++i) t.set(i, rng.uniform(-0.4, 0.4));
    bool trainable = p.trainable;
    p.tensor = t;
    p.tensor.set_requires_grad(trainable);
  }
  Tensor xt = Tensor::zeros({2, 4, 4, 8}, Dtype::f64);
  Tensor xv = Tensor::zeros({2, 4, 4, 8}, Dtype::f64);
  for (int64_t i = 0; i < xt.numel(); ++i) {
    xt.set(i, rng.uniform(-1.0, 1.0));
    xv.set(i, rng.uniform(-1.0, 1.0));
  }
  Tensor y = one_hot({0, 2}, 3, Dtype::f64);
  auto forward = [&]() {
    Tensor emb_t = model64.thermal_head(xt);
    Tensor emb_v = model64.visible_head(xv);
    Tensor lc = cross_spectrum_loss(emb_t, y, model64);
    Tensor lv = cross_spectrum_loss(emb_v, y, model64);
    Tensor lp = pose_correction_loss(emb_v, emb_t);
    return add(add(lc, lv), scale(lp, 1e-3));
  };
  Tensor loss = forward();
  backward(loss);
  std::vector<std::pair<std::string, Tensor>> analytic;
  for (auto& p : model64.params().items()) {
    REQUIRE(p.tensor.has_grad());
    analytic.emplace_back(p.name, p.tensor.grad_tensor());
  }
  auto f = [&]() { return forward().at(0); };
  for (auto& [name, grad] : analytic) {
    Tensor& t = model64.params().at(name).tensor;
    double err = oracles::finite_diff_max_rel_error(t, f, grad);
    INFO("parameter ", name);
    CHECK(err <= 1e-5);
  }
}
