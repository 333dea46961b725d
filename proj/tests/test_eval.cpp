// tests/test_eval.cpp

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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "dpif/eval.hpp"
#include "dpif/rng.hpp"
#include "oracles.hpp"

using namespace dpif;

namespace {

EmbeddingSet make_set(const std::vector<std::vector<float>>& rows,
                      const std::vector<std::string>& ids) {
  EmbeddingSet s;
  int64_t d = static_cast<int64_t>(rows[0].size());
  s.vectors = Tensor::zeros({static_cast<int64_t>(rows.size()), d});
  auto& v = s.vectors.vals<float>();
  for (size_t r = 0; r < rows.size(); ++r)
    for (int64_t c = 0; c < d; ++c)
      v[static_cast<size_t>(static_cast<int64_t>(r) * d + c)] = rows[r][static_cast<size_t>(c)];
  s.subject_ids = ids;
  return s;
}

ScoreMatrix random_matrix(Rng& rng, int64_t probes, int64_t gallery,
                          int num_subjects) {
  ScoreMatrix m;
  m.num_probes = probes;
  m.num_gallery = gallery;
  for (int64_t p = 0; p < probes; ++p)
    m.probe_ids.push_back("S" + std::to_string(rng.index(num_subjects)));
  for (int64_t g = 0; g < gallery; ++g)
    m.gallery_ids.push_back("S" + std::to_string(rng.index(num_subjects)));
  // Ensure at least one genuine and one impostor pair.
  m.gallery_ids[0] = m.probe_ids[0];
  if (gallery > 1) m.gallery_ids[1] = m.probe_ids[0] + "_x";
  for (int64_t i = 0; i < probes * gallery; ++i)
    m.scores.push_back(rng.uniform(-1.0, 1.0));
  return m;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  Tensor v = Tensor::from_f32({3}, {0.3f, -1.2f, 2.0f});
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-12));
  Tensor e1 = Tensor::from_f32({2}, {1.0f, 0.0f});
  Tensor e2 = Tensor::from_f32({2}, {0.0f, 1.0f});
  CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0).epsilon(1e-15));
  Tensor pos = Tensor::from_f32({3}, {0.6f, -2.4f, 4.0f});  // 2v
  Tensor neg = Tensor::from_f32({3}, {-0.3f, 1.2f, -2.0f});
  CHECK(cosine_similarity(v, pos) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine_similarity(v, neg) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK_THROWS_AS(cosine_similarity(v, Tensor::zeros({3})), Error);
}

TEST_CASE("score matrix of one self-match is [[1.0]]") {
  EmbeddingSet probe = make_set({{0.5f, 0.5f}}, {"A"});
  ScoreMatrix m = build_score_matrix(probe, probe);
  REQUIRE(m.num_probes == 1);
  REQUIRE(m.num_gallery == 1);
  CHECK(m.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("permuting the gallery permutes columns identically") {
  Rng rng(8);
  std::vector<std::vector<float>> rows;
  std::vector<std::string> ids;
  for (int i = 0; i < 5; ++i) {
    rows.push_back({static_cast<float>(rng.normal()),
                    static_cast<float>(rng.normal()),
                    static_cast<float>(rng.normal())});
    ids.push_back("G" + std::to_string(i));
  }
  EmbeddingSet gallery = make_set(rows, ids);
  EmbeddingSet probes = make_set({rows[0], rows[3]}, {"G0", "G3"});
  ScoreMatrix base = build_score_matrix(probes, gallery);
  std::vector<std::vector<float>> perm_rows = {rows[4], rows[2], rows[0],
                                               rows[1], rows[3]};
  std::vector<std::string> perm_ids = {"G4", "G2", "G0", "G1", "G3"};
  ScoreMatrix perm =
      build_score_matrix(probes, make_set(perm_rows, perm_ids));
  int64_t src[5] = {4, 2, 0, 1, 3};
  for (int64_t p = 0; p < base.num_probes; ++p)
    for (int64_t g = 0; g < 5; ++g)
      CHECK(perm.at(p, g) == base.at(p, src[g]));
}

TEST_CASE("score matrix matches a naive double-loop oracle") {
  Rng rng(15);
  std::vector<std::vector<float>> prows, grows;
  std::vector<std::string> pids, gids;
  for (int i = 0; i < 4; ++i) {
    prows.push_back({static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal())});
    pids.push_back("P" + std::to_string(i));
  }
  for (int i = 0; i < 6; ++i) {
    grows.push_back({static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal())});
    gids.push_back("G" + std::to_string(i));
  }
  ScoreMatrix m =
      build_score_matrix(make_set(prows, pids), make_set(grows, gids));
  for (int64_t p = 0; p < 4; ++p)
    for (int64_t g = 0; g < 6; ++g) {
      double dot = 0, na = 0, nb = 0;
      for (int64_t c = 0; c < 2; ++c) {
        double a = prows[static_cast<size_t>(p)][static_cast<size_t>(c)];
        double b = grows[static_cast<size_t>(g)][static_cast<size_t>(c)];
        dot += a * b;
        na += a * a;
        nb += b * b;
      }
      CHECK(std::abs(m.at(p, g) - dot / std::sqrt(na * nb)) <= 1e-12);
    }
  EmbeddingSet zero = make_set({{0.0f, 0.0f}}, {"Z"});
  zero.item_names = {"zero_item"};
  try {
    build_score_matrix(zero, make_set(grows, gids));
    FAIL("expected zero-vector error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("zero_item") != std::string::npos);
  }
}

TEST_CASE("perfect separation gives AUC 1, EER 0, TAR 1") {
  ScoreMatrix m;
  m.num_probes = 3;
  m.num_gallery = 3;
  m.probe_ids = {"A", "B", "C"};
  m.gallery_ids = {"A", "B", "C"};
  m.scores = {0.9, 0.1, 0.2,   //
              0.15, 0.8, 0.05, //
              0.3, 0.25, 0.95};
  VerificationReport r = verification_report(m);
  CHECK(r.auc == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.eer == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.tar_at_1pct_far == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.tar_at_5pct_far == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical genuine and impostor distributions give AUC 0.5") {
  ScoreMatrix m;
  m.num_probes = 4;
  m.num_gallery = 2;
  m.probe_ids = {"A", "A", "B", "B"};
  m.gallery_ids = {"A", "B"};
  // Same score multiset {0.1, 0.6, 0.3, 0.8} for both pair classes.
  m.scores = {0.1, 0.6,   //
              0.3, 0.8,   //
              0.1, 0.6,   //
              0.3, 0.8};
  // genuine: col A rows 0,1 = {0.1, 0.3}; col B rows 2,3 = {0.6, 0.8}
  // impostor: {0.6, 0.8, 0.1, 0.3}
  VerificationReport r = verification_report(m);
  CHECK(r.auc == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("verification needs both genuine and impostor pairs") {
  ScoreMatrix only_genuine;
  only_genuine.num_probes = 1;
  only_genuine.num_gallery = 1;
  only_genuine.probe_ids = {"A"};
  only_genuine.gallery_ids = {"A"};
  only_genuine.scores = {0.5};
  CHECK_THROWS_AS(verification_report(only_genuine), Error);
  ScoreMatrix only_impostor = only_genuine;
  only_impostor.probe_ids = {"B"};
  CHECK_THROWS_AS(verification_report(only_impostor), Error);
}

TEST_CASE("reports agree with the exhaustive threshold-enumeration oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    int64_t probes = 2 + rng.index(49);   // up to 50
    int64_t gallery = 2 + rng.index(39);  // up to 40
    int subjects = 2 + static_cast<int>(rng.index(12));
    ScoreMatrix m = random_matrix(rng, probes, gallery, subjects);
    std::vector<double> genuine, impostor;
    oracles::brute_pools(m, &genuine, &impostor);
    if (genuine.empty() || impostor.empty()) continue;
    VerificationReport r = verification_report(m);
    double auc_ref = oracles::mann_whitney_auc(genuine, impostor);
    auto roc_ref = oracles::brute_roc(genuine, impostor);
    CHECK(std::abs(r.auc - auc_ref) <= 1e-9);
    CHECK(std::abs(r.eer - oracles::brute_eer(roc_ref)) <= 1e-9);
    CHECK(std::abs(r.tar_at_1pct_far -
                   oracles::brute_tar_at(roc_ref, 0.01)) <= 1e-9);
    CHECK(std::abs(r.tar_at_5pct_far -
                   oracles::brute_tar_at(roc_ref, 0.05)) <= 1e-9);
    // Monotone threshold property.
    CHECK(r.tar_at_5pct_far >= r.tar_at_1pct_far);
  }
}

TEST_CASE("roc sweep endpoints and monotonicity") {
  Rng rng(77);
  ScoreMatrix m = random_matrix(rng, 12, 9, 4);
  RocCurve roc = roc_curve(m);
  CHECK(roc.points.front().first == 0.0);
  CHECK(roc.points.front().second == 0.0);
  CHECK(roc.points.back().first == 1.0);
  CHECK(roc.points.back().second == 1.0);
  for (size_t i = 1; i < roc.points.size(); ++i) {
    CHECK(roc.points[i].first >= roc.points[i - 1].first);
    CHECK(roc.points[i].second >= roc.points[i - 1].second);
  }
}

TEST_CASE("cosine scale invariance propagates to every report") {
  Rng rng(31);
  std::vector<std::vector<float>> prows, grows;
  std::vector<std::string> pids = {"A", "B", "A", "C"};
  std::vector<std::string> gids = {"A", "B", "C", "B"};
  for (int i = 0; i < 4; ++i) {
    prows.push_back({static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal())});
    grows.push_back({static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal()),
                     static_cast<float>(rng.normal())});
  }
  EmbeddingSet p = make_set(prows, pids), g = make_set(grows, gids);
  ScoreMatrix m1 = build_score_matrix(p, g);
  // power-of-two scaling keeps float arithmetic exact
  auto scaled = prows;
  for (auto& row : scaled)
    for (auto& v : row) v *= 4.0f;
  ScoreMatrix m2 = build_score_matrix(make_set(scaled, pids), g);
  for (size_t i = 0; i < m1.scores.size(); ++i)
    CHECK(m1.scores[i] == m2.scores[i]);
  VerificationReport r1 = verification_report(m1);
  VerificationReport r2 = verification_report(m2);
  CHECK(r1.auc == r2.auc);
  CHECK(r1.eer == r2.eer);
  IdentificationReport i1 = identification_report(m1, {1, 5});
  IdentificationReport i2 = identification_report(m2, {1, 5});
  CHECK(i1.rank_accuracy == i2.rank_accuracy);
  CHECK(i1.topk == i2.topk);
}

TEST_CASE("identification basics") {
  ScoreMatrix m;
  m.num_probes = 1;
  m.num_gallery = 1;
  m.probe_ids = {"A"};
  m.gallery_ids = {"A"};
  m.scores = {0.2};
  IdentificationReport r = identification_report(m, {1});
  CHECK(r.rank_accuracy.at(1) == 1.0);
  CHECK(r.excluded == 0);
}

TEST_CASE("all-equal scores resolve by ascending gallery index") {
  ScoreMatrix m;
  m.num_probes = 2;
  m.num_gallery = 3;
  m.probe_ids = {"X", "Y"};
  m.gallery_ids = {"X", "Y", "Z"};
  m.scores = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  IdentificationReport r = identification_report(m, {1, 2});
  // Probe X hits at rank 1 (column 0); probe Y only at rank 2.
  CHECK(r.rank_accuracy.at(1) == 0.5);
  CHECK(r.rank_accuracy.at(2) == 1.0);
  CHECK(r.topk[0][0] == "X");
  CHECK(r.topk[1][0] == "X");
  CHECK(r.topk[1][1] == "Y");
}

TEST_CASE("identification matches an exhaustive sort oracle") {
  Rng rng(63);
  ScoreMatrix m = random_matrix(rng, 10, 8, 5);
  IdentificationReport r = identification_report(m, {1, 3});
  // Oracle: fuse by subject, then sort (score desc, first-appearance
  // index asc) with a plain selection scan.
  std::vector<std::string> subjects;
  for (const auto& id : m.gallery_ids)
    if (std::find(subjects.begin(), subjects.end(), id) == subjects.end())
      subjects.push_back(id);
  for (int64_t p = 0; p < m.num_probes; ++p) {
    std::vector<double> fused;
    for (const auto& s : subjects) {
      double best = -2.0;
      for (int64_t g = 0; g < m.num_gallery; ++g)
        if (m.gallery_ids[static_cast<size_t>(g)] == s)
          best = std::max(best, m.at(p, g));
      fused.push_back(best);
    }
    std::vector<size_t> order(subjects.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = 0; i < order.size(); ++i)
      for (size_t j = i + 1; j < order.size(); ++j)
        if (fused[order[j]] > fused[order[i]]) std::swap(order[i], order[j]);
    for (size_t k = 0; k < r.topk[static_cast<size_t>(p)].size(); ++k)
      CHECK(r.topk[static_cast<size_t>(p)][k] == subjects[order[k]]);
  }
}

TEST_CASE("probes without an enrolled subject are excluded and tallied") {
  ScoreMatrix m;
  m.num_probes = 3;
  m.num_gallery = 2;
  m.probe_ids = {"A", "GHOST", "B"};
  m.gallery_ids = {"A", "B"};
  m.scores = {0.9, 0.1, 0.4, 0.6, 0.2, 0.7};
  IdentificationReport r = identification_report(m, {1});
  CHECK(r.excluded == 1);
  CHECK(r.rank_accuracy.at(1) == 1.0);  // over the two enrolled probes
}

TEST_CASE("rank accuracy is monotone in k") {
  Rng rng(99);
  ScoreMatrix m = random_matrix(rng, 15, 10, 6);
  IdentificationReport r = identification_report(m, {1, 5});
  CHECK(r.rank_accuracy.at(1) <= r.rank_accuracy.at(5));
}

TEST_CASE("export files round-trip and carry the documented layout") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "dpif_eval_export";
  fs::create_directories(dir);
  Rng rng(123);
  ScoreMatrix m = random_matrix(rng, 7, 5, 3);
  std::string mpath = (dir / "scores.csv").string();
  export_score_matrix(m, mpath);
  ScoreMatrix back = parse_score_matrix(mpath);
  REQUIRE(back.num_probes == m.num_probes);
  REQUIRE(back.num_gallery == m.num_gallery);
  CHECK(back.probe_ids == m.probe_ids);
  CHECK(back.gallery_ids == m.gallery_ids);
  for (size_t i = 0; i < m.scores.size(); ++i)
    CHECK(back.scores[i] == m.scores[i]);

  RocCurve roc = roc_curve(m);
  std::string rpath = (dir / "roc.csv").string();
  export_roc(roc, rpath);
  std::ifstream rin(rpath);
  std::string line;
  std::getline(rin, line);
  CHECK(line == "far,tar");
  std::getline(rin, line);
  CHECK(line.rfind("0,0", 0) == 0);
  std::string last;
  while (std::getline(rin, line))
    if (!line.empty()) last = line;
  CHECK(last == "1,1");

  VerificationReport rep = report_from_roc(roc);
  std::string spath = (dir / "summary.csv").string();
  export_summary(rep, spath);
  std::ifstream sin(spath);
  std::getline(sin, line);
  CHECK(line == "auc,eer,tar_at_1pct_far,tar_at_5pct_far");

  CHECK_THROWS_AS(export_summary(rep, (dir / "no_dir" / "x.csv").string()),
                  Error);
}
