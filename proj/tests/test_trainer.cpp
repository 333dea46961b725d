// tests/test_trainer.cpp

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

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "dpif/trainer.hpp"

using namespace dpif;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "dpif_trainer_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Small but real dataset: 8 subjects, 3 yaws, 2 copies.
std::string small_dataset(const std::string& tag, uint64_t seed = 11) {
  static std::map<std::string, std::string> cache;
  auto it = cache.find(tag);
  if (it != cache.end()) return it->second;
  SyntheticConfig cfg;
  cfg.seed = seed;
  cfg.num_subjects = 8;
  cfg.num_train_subjects = 5;
  cfg.images_per_cell = 2;
  cfg.yaw_grid = {-45, 0, 45};
  fs::path dir = scratch("data_" + tag);
  synth_generate(cfg, dir.string());
  cache[tag] = dir.string();
  return dir.string();
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.train.family = Family::tiny;
  cfg.train.truncation = "block3_pool";
  cfg.train.embed_dim = 16;
  cfg.train.phase1_epochs = 2;
  cfg.train.phase2_epochs = 3;
  cfg.train.batch_size = 8;
  cfg.train.seed = 3;
  return cfg;
}

std::string file_bytes(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<float> snapshot(const ParameterSet& params,
                            const std::string& prefix) {
  std::vector<float> out;
  for (const auto& p : params.items())
    if (p.name.rfind(prefix, 0) == 0)
      for (int64_t i = 0; i < p.tensor.numel(); ++i)
        out.push_back(static_cast<float>(p.tensor.at(i)));
  return out;
}

}  // namespace

TEST_CASE("pair sampler contract") {
  Dataset ds = Dataset::load(small_dataset("sampler"));
  PairSampler sampler(ds.train);
  CHECK(sampler.classes().size() == 5);
  auto pairs = sampler.epoch(7, 0);
  // every off-pose thermal image appears exactly once per epoch
  int64_t off_pose_thermal = 0;
  for (const auto& e : ds.train)
    if (e.spectrum == Spectrum::thermal && e.pose_class == PoseClass::off_pose)
      ++off_pose_thermal;
  CHECK(static_cast<int64_t>(pairs.size()) == off_pose_thermal);
  std::set<const ManifestEntry*> seen;
  for (const auto& p : pairs) {
    CHECK(p.thermal->subject_id == p.visible->subject_id);  // 100% agreement
    CHECK(p.visible->spectrum == Spectrum::visible);
    CHECK(p.visible->pose_class == PoseClass::frontal);
    CHECK(seen.insert(p.thermal).second);
  }
  // same seed: identical sequence; different epoch: same multiset of
  // thermal entries, freshly drawn partners
  auto again = sampler.epoch(7, 0);
  REQUIRE(again.size() == pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    CHECK(pairs[i].thermal == again[i].thermal);
    CHECK(pairs[i].visible == again[i].visible);
  }
}

TEST_CASE("sampler pairs each thermal image even with uneven pools") {
  // identity with 3 off-pose thermal and 2 frontal visible images
  std::vector<ManifestEntry> manifest;
  auto add = [&](Spectrum sp, PoseClass pc, const std::string& path,
                 std::optional<double> yaw) {
    ManifestEntry e;
    e.subject_id = "S001";
    e.spectrum = sp;
    e.pose_class = pc;
    e.condition = pc == PoseClass::frontal ? Condition::baseline
                                           : Condition::pose;
    e.path = path;
    e.yaw_degrees = yaw;
    manifest.push_back(e);
  };
  add(Spectrum::thermal, PoseClass::off_pose, "t1", -60.0);
  add(Spectrum::thermal, PoseClass::off_pose, "t2", 30.0);
  add(Spectrum::thermal, PoseClass::off_pose, "t3", 60.0);
  add(Spectrum::visible, PoseClass::frontal, "v1", 0.0);
  add(Spectrum::visible, PoseClass::frontal, "v2", 0.0);
  PairSampler sampler(manifest);
  auto pairs = sampler.epoch(1, 0);
  CHECK(pairs.size() == 3);
}

TEST_CASE("sampler names the identity missing a modality") {
  std::vector<ManifestEntry> manifest;
  ManifestEntry e;
  e.subject_id = "S042";
  e.spectrum = Spectrum::visible;
  e.pose_class = PoseClass::frontal;
  e.condition = Condition::baseline;
  e.path = "v";
  manifest.push_back(e);
  try {
    PairSampler sampler(manifest);
    FAIL("expected missing-modality error");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("S042") != std::string::npos);
  }
}

TEST_CASE("phase 1 trains the classifier above chance and is deterministic") {
  std::string data = small_dataset("phase1");
  RunConfig cfg = small_config();
  cfg.train.phase1_epochs = 6;
  Trainer a(cfg, Dataset::load(data));
  a.train_phase1();
  // training top-1 accuracy above chance (1/5)
  Dataset ds = Dataset::load(data);
  FeatureCache cache(std::make_shared<Backbone>(Backbone::build_seeded(
                         BackboneSpec::make(Family::tiny, "block3_pool"),
                         cfg.train.seed)),
                     ds.root, false);
  int hits = 0, total = 0;
  for (const auto& e : ds.train) {
    if (e.spectrum != Spectrum::visible || e.pose_class != PoseClass::frontal)
      continue;
    Tensor emb = a.model().visible_head(cache.batch({&e}));
    Tensor logits = a.model().classify(emb);
    int best = 0;
    for (int k = 1; k < static_cast<int>(logits.size(1)); ++k)
      if (logits.at(k) > logits.at(best)) best = k;
    if (a.sampler().classes()[static_cast<size_t>(best)] == e.subject_id)
      ++hits;
    ++total;
  }
  double acc = static_cast<double>(hits) / total;
  CHECK(acc > 1.0 / 5.0);

  // two runs with equal seeds produce bit-identical parameters
  Trainer b(cfg, Dataset::load(data));
  b.train_phase1();
  CHECK(snapshot(a.model().params(), "head.") ==
        snapshot(b.model().params(), "head."));
}

TEST_CASE("classifier gradients exist in phase 1 and vanish in phase 2") {
  std::string data = small_dataset("freeze");
  RunConfig cfg = small_config();
  Trainer t(cfg, Dataset::load(data));
  t.train_phase1();
  std::vector<float> theta_before = snapshot(t.model().params(),
                                             "head.classifier.");
  std::vector<float> backbone_before =
      snapshot(t.model().backbone().params(), "backbone.");
  t.train_phase2();
  // freeze discipline: classifier and backbone parameters are untouched
  CHECK(snapshot(t.model().params(), "head.classifier.") == theta_before);
  CHECK(snapshot(t.model().backbone().params(), "backbone.") ==
        backbone_before);
  // and the joint loss history was logged for every epoch
  int p1 = 0, p2 = 0;
  for (const auto& st : t.history()) {
    if (st.phase == 1) ++p1;
    if (st.phase == 2) {
      ++p2;
      CHECK(st.l_p >= 0.0);
    }
  }
  CHECK(p1 == cfg.train.phase1_epochs);
  CHECK(p2 == cfg.train.phase2_epochs);
}

TEST_CASE("zero learning rate leaves every parameter untouched") {
  std::string data = small_dataset("zerolr");
  RunConfig cfg = small_config();
  cfg.train.optim.lr = 0.0;
  Trainer t(cfg, Dataset::load(data));
  std::vector<float> before = snapshot(t.model().params(), "head.");
  t.train_phase1();
  t.train_phase2();
  CHECK(snapshot(t.model().params(), "head.") == before);
}

TEST_CASE("training loss decreases substantially on the synthetic set") {
  std::string data = small_dataset("descent");
  RunConfig cfg = small_config();
  cfg.train.phase1_epochs = 4;
  cfg.train.phase2_epochs = 15;
  Trainer t(cfg, Dataset::load(data));
  t.train_phase1();
  t.train_phase2();
  double first = 0.0, last = 0.0;
  for (const auto& st : t.history()) {
    if (st.phase == 2 && st.epoch == 1) first = st.l;
    if (st.phase == 2 && st.epoch == cfg.train.phase2_epochs) last = st.l;
  }
  CHECK(last <= 0.5 * first);
}

TEST_CASE("checkpoint resume reproduces straight-through training bit-exactly") {
  std::string data = small_dataset("resume");
  RunConfig cfg = small_config();
  cfg.train.phase2_epochs = 4;
  fs::path full_dir = scratch("resume_full");
  fs::path part_dir = scratch("resume_part");
  fs::path cont_dir = scratch("resume_cont");
  // straight run
  TrainOutcome full = run_training(cfg, data, full_dir.string());
  // partial run: stop after 2 phase-2 epochs, then resume
  RunConfig partial = cfg;
  partial.train.phase2_epochs = 2;
  TrainOutcome part = run_training(partial, data, part_dir.string());
  TrainOutcome cont =
      run_training(cfg, data, cont_dir.string(), part.checkpoint_path);
  CHECK(file_bytes(full.checkpoint_path) == file_bytes(cont.checkpoint_path));
}

TEST_CASE("same-seed pipelines yield byte-identical checkpoints") {
  std::string data = small_dataset("determinism");
  RunConfig cfg = small_config();
  fs::path a = scratch("det_a");
  fs::path b = scratch("det_b");
  TrainOutcome ra = run_training(cfg, data, a.string());
  TrainOutcome rb = run_training(cfg, data, b.string());
  CHECK(file_bytes(ra.checkpoint_path) == file_bytes(rb.checkpoint_path));
}

TEST_CASE("run_eval emits reports, exports, and a table") {
  std::string data = small_dataset("eval");
  RunConfig cfg = small_config();
  fs::path train_dir = scratch("eval_train");
  TrainOutcome t = run_training(cfg, data, train_dir.string());
  fs::path eval_dir = scratch("eval_out");
  EvalOutcome e = run_eval(t.checkpoint_path, data, "G_VB0-", {"P_TP0"},
                           eval_dir.string());
  REQUIRE(e.rows.size() == 1);
  CHECK(e.rows[0].verification.auc >= 0.0);
  CHECK(e.rows[0].verification.auc <= 1.0);
  CHECK(fs::exists(eval_dir / "P_TP0_vs_G_VB0__scores.csv"));
  CHECK(fs::exists(eval_dir / "P_TP0_vs_G_VB0__roc.csv"));
  CHECK(fs::exists(eval_dir / "P_TP0_vs_G_VB0__summary.csv"));
  CHECK(fs::exists(eval_dir / "P_TP0_vs_G_VB0__top5.csv"));
  CHECK(e.table_text.find("AUC(%)") != std::string::npos);
  // evaluating twice gives identical reports
  fs::path eval_dir2 = scratch("eval_out2");
  EvalOutcome e2 = run_eval(t.checkpoint_path, data, "G_VB0-", {"P_TP0"},
                            eval_dir2.string());
  CHECK(file_bytes((eval_dir / "P_TP0_vs_G_VB0__scores.csv").string()) ==
        file_bytes((eval_dir2 / "P_TP0_vs_G_VB0__scores.csv").string()));
  CHECK(e.table_text == e2.table_text);
}

TEST_CASE("run_eval rejects probe sets with no enrolled subjects") {
  std::string data = small_dataset("eval_err");
  RunConfig cfg = small_config();
  fs::path train_dir = scratch("eval_err_train");
  TrainOutcome t = run_training(cfg, data, train_dir.string());
  CHECK_THROWS_AS(run_eval(t.checkpoint_path, data, "G_VB0-", {"P_TB+"},
                           scratch("eval_err_out").string()),
                  Error);
}

TEST_CASE("ablation grids validate values and emit full rows") {
  std::string data = small_dataset("ablate");
  RunConfig cfg = small_config();
  cfg.train.phase1_epochs = 1;
  cfg.train.phase2_epochs = 1;
  cfg.eval_probes = "P_TP0";
  // invalid grid values are rejected
  CHECK_THROWS_AS(run_ablation(AblationKind::embedding_size, {"100"}, cfg,
                               data, scratch("ab_bad").string()),
                  Error);
  CHECK_THROWS_AS(run_ablation(AblationKind::lambda_sweep, {"-1"}, cfg, data,
                               scratch("ab_bad2").string()),
                  Error);
  CHECK_THROWS_AS(run_ablation(AblationKind::activation_combo, {"gelu-relu"},
                               cfg, data, scratch("ab_bad3").string()),
                  Error);
  CHECK_THROWS_AS(run_ablation(AblationKind::truncation_depth, {"block_4e"},
                               cfg, data, scratch("ab_bad4").string()),
                  Error);
  // a lambda grid including 0 and 1e-5 runs end to end
  fs::path dir = scratch("ab_lambda");
  AblationOutcome out = run_ablation(AblationKind::lambda_sweep,
                                     {"0", "1e-5"}, cfg, data, dir.string());
  REQUIRE(out.rows.size() == 2);
  CHECK(fs::exists(out.table_path));
  // embedding grid rows carry the exact trainable counts
  fs::path dir2 = scratch("ab_embed");
  AblationOutcome embed = run_ablation(AblationKind::embedding_size,
                                       {"64", "128"}, cfg, data,
                                       dir2.string());
  REQUIRE(embed.rows.size() == 2);
  CHECK(embed.rows[1].trainable_params > embed.rows[0].trainable_params);
  auto backbone = std::make_shared<const Backbone>(Backbone::build_seeded(
      BackboneSpec::make(Family::tiny, "block3_pool"), cfg.train.seed));
  for (size_t i = 0; i < 2; ++i) {
    int d = i == 0 ? 64 : 128;
    DpitModel reference = DpitModel::build(
        backbone, d, cfg.train.groups, cfg.train.f_inner, cfg.train.f_act,
        cfg.train.g_act, 5, cfg.train.seed);
    CHECK(embed.rows[i].trainable_params == reference.count_trainable());
  }
  // activation grid enumerates the four combos
  fs::path dir3 = scratch("ab_act");
  AblationOutcome act = run_ablation(
      AblationKind::activation_combo,
      {"tanh-relu", "tanh-tanh", "relu-relu", "relu-tanh"}, cfg, data,
      dir3.string());
  CHECK(act.rows.size() == 4);
}
