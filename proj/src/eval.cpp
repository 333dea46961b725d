// dpif/eval.cpp

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

#include "dpif/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace dpif {

namespace {

std::vector<double> row_as_double(const Tensor& m, int64_t row) {
  const int64_t d = m.size(1);
  std::vector<double> out(static_cast<size_t>(d));
  for (int64_t i = 0; i < d; ++i) out[static_cast<size_t>(i)] = m.at(row * d + i);
  return out;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b,
              const std::string& a_label, const std::string& b_label) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  require(na > 0.0, ErrorCode::invalid_argument,
          "cosine similarity of zero vector (" + a_label + ")");
  require(nb > 0.0, ErrorCode::invalid_argument,
          "cosine similarity of zero vector (" + b_label + ")");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double cosine_similarity(const Tensor& a, const Tensor& b) {
  require(a.rank() == 1 && b.rank() == 1 && a.numel() == b.numel(),
          ErrorCode::shape_mismatch,
          "cosine_similarity expects equal-length vectors, got " +
              shape_str(a.shape()) + " and " + shape_str(b.shape()));
  std::vector<double> av(static_cast<size_t>(a.numel()));
  std::vector<double> bv(static_cast<size_t>(b.numel()));
  for (int64_t i = 0; i < a.numel(); ++i) {
    av[static_cast<size_t>(i)] = a.at(i);
    bv[static_cast<size_t>(i)] = b.at(i);
  }
  return cosine(av, bv, "a", "b");
}

ScoreMatrix build_score_matrix(const EmbeddingSet& probes,
                               const EmbeddingSet& gallery) {
  require(probes.vectors.defined() && gallery.vectors.defined() &&
              probes.vectors.rank() == 2 && gallery.vectors.rank() == 2,
          ErrorCode::invalid_argument,
          "score matrix needs [N,d] embedding sets");
  const int64_t P = probes.vectors.size(0), G = gallery.vectors.size(0);
  require(P > 0 && G > 0, ErrorCode::invalid_argument,
          "score matrix needs non-empty probe and gallery sets");
  require(probes.vectors.size(1) == gallery.vectors.size(1),
          ErrorCode::shape_mismatch,
          "probe and gallery embedding sizes differ");
  require(static_cast<int64_t>(probes.subject_ids.size()) == P &&
              static_cast<int64_t>(gallery.subject_ids.size()) == G,
          ErrorCode::invalid_argument, "id arrays must match matrix extents");
  auto label = [](const EmbeddingSet& s, int64_t i, const char* role) {
    if (i < static_cast<int64_t>(s.item_names.size()))
      return s.item_names[static_cast<size_t>(i)];
    return std::string(role) + "[" + std::to_string(i) + "]";
  };
  std::vector<std::vector<double>> pv, gv;
  pv.reserve(static_cast<size_t>(P));
  gv.reserve(static_cast<size_t>(G));
  for (int64_t i = 0; i < P; ++i) pv.push_back(row_as_double(probes.vectors, i));
  for (int64_t j = 0; j < G; ++j) gv.push_back(row_as_double(gallery.vectors, j));
  ScoreMatrix m;
  m.num_probes = P;
  m.num_gallery = G;
  m.probe_ids = probes.subject_ids;
  m.gallery_ids = gallery.subject_ids;
  m.scores.resize(static_cast<size_t>(P * G));
  for (int64_t i = 0; i < P; ++i)
    for (int64_t j = 0; j < G; ++j)
      m.scores[static_cast<size_t>(i * G + j)] =
          cosine(pv[static_cast<size_t>(i)], gv[static_cast<size_t>(j)],
                 label(probes, i, "probe"), label(gallery, j, "gallery"));
  return m;
}

ScoreMatrix fuse_gallery_by_subject(const ScoreMatrix& m) {
  std::vector<std::string> subjects;
  std::map<std::string, int64_t> col_of;
  for (const auto& id : m.gallery_ids) {
    if (col_of.emplace(id, static_cast<int64_t>(subjects.size())).second)
      subjects.push_back(id);
  }
  ScoreMatrix out;
  out.num_probes = m.num_probes;
  out.num_gallery = static_cast<int64_t>(subjects.size());
  out.probe_ids = m.probe_ids;
  out.gallery_ids = subjects;
  out.scores.assign(static_cast<size_t>(out.num_probes * out.num_gallery),
                    -std::numeric_limits<double>::infinity());
  for (int64_t p = 0; p < m.num_probes; ++p) {
    for (int64_t g = 0; g < m.num_gallery; ++g) {
      int64_t col = col_of[m.gallery_ids[static_cast<size_t>(g)]];
      double& slot = out.scores[static_cast<size_t>(p * out.num_gallery + col)];
      slot = std::max(slot, m.at(p, g));
    }
  }
  return out;
}

RocCurve roc_curve(const ScoreMatrix& raw) {
  ScoreMatrix m = fuse_gallery_by_subject(raw);
  std::vector<double> genuine, impostor;
  for (int64_t p = 0; p < m.num_probes; ++p)
    for (int64_t g = 0; g < m.num_gallery; ++g) {
      if (m.probe_ids[static_cast<size_t>(p)] ==
          m.gallery_ids[static_cast<size_t>(g)])
        genuine.push_back(m.at(p, g));
      else
        impostor.push_back(m.at(p, g));
    }
  require(!genuine.empty(), ErrorCode::invalid_argument,
          "verification needs at least one genuine (same-subject) pair");
  require(!impostor.empty(), ErrorCode::invalid_argument,
          "verification needs at least one impostor pair");
  // Decreasing-threshold sweep over all distinct scores, with sentinels.
  std::vector<double> all = genuine;
  all.insert(all.end(), impostor.begin(), impostor.end());
  std::sort(all.begin(), all.end(), std::greater<double>());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::sort(genuine.begin(), genuine.end(), std::greater<double>());
  std::sort(impostor.begin(), impostor.end(), std::greater<double>());
  const double ng = static_cast<double>(genuine.size());
  const double ni = static_cast<double>(impostor.size());
  RocCurve roc;
  roc.points.emplace_back(0.0, 0.0);  // threshold +inf
  size_t gi = 0, ii = 0;
  for (double t : all) {
    while (gi < genuine.size() && genuine[gi] >= t) ++gi;
    while (ii < impostor.size() && impostor[ii] >= t) ++ii;
    roc.points.emplace_back(static_cast<double>(ii) / ni,
                            static_cast<double>(gi) / ng);
  }
  roc.points.emplace_back(1.0, 1.0);  // threshold -inf
  return roc;
}

double tar_at_far(const RocCurve& roc, double far) {
  // Upper envelope: max TAR per FAR value, then linear interpolation.
  std::vector<std::pair<double, double>> env;
  for (const auto& pt : roc.points) {
    if (!env.empty() && env.back().first == pt.first)
      env.back().second = std::max(env.back().second, pt.second);
    else
      env.push_back(pt);
  }
  if (far <= env.front().first) return env.front().second;
  for (size_t i = 1; i < env.size(); ++i) {
    if (far <= env[i].first) {
      double f0 = env[i - 1].first, f1 = env[i].first;
      double t0 = env[i - 1].second, t1 = env[i].second;
      double s = (far - f0) / (f1 - f0);
      return t0 + s * (t1 - t0);
    }
  }
  return env.back().second;
}

VerificationReport report_from_roc(const RocCurve& roc) {
  VerificationReport r;
  // Trapezoid area over the sweep-ordered polyline.
  double auc = 0.0;
  for (size_t i = 1; i < roc.points.size(); ++i) {
    double df = roc.points[i].first - roc.points[i - 1].first;
    auc += df * (roc.points[i].second + roc.points[i - 1].second) * 0.5;
  }
  r.auc = auc;
  // EER: first crossing of FAR - FRR along the polyline, solved linearly
  // on the crossing segment.
  double eer = 1.0;
  for (size_t i = 1; i < roc.points.size(); ++i) {
    double d0 = roc.points[i - 1].first - (1.0 - roc.points[i - 1].second);
    double d1 = roc.points[i].first - (1.0 - roc.points[i].second);
    if (d1 >= 0.0) {
      if (d1 == d0) {
        eer = roc.points[i - 1].first;
      } else {
        double s = -d0 / (d1 - d0);
        eer = roc.points[i - 1].first +
              s * (roc.points[i].first - roc.points[i - 1].first);
      }
      break;
    }
  }
  r.eer = eer;
  r.tar_at_1pct_far = tar_at_far(roc, 0.01);
  r.tar_at_5pct_far = tar_at_far(roc, 0.05);
  return r;
}

VerificationReport verification_report(const ScoreMatrix& m) {
  return report_from_roc(roc_curve(m));
}

IdentificationReport identification_report(const ScoreMatrix& raw,
                                           const std::vector<int>& k_list) {
  ScoreMatrix m = fuse_gallery_by_subject(raw);
  IdentificationReport rep;
  const int64_t S = m.num_gallery;
  int max_k = 0;
  for (int k : k_list) {
    require(k >= 1, ErrorCode::invalid_argument, "rank k must be >= 1");
    max_k = std::max(max_k, k);
  }
  max_k = static_cast<int>(std::min<int64_t>(max_k, S));
  std::map<int, int64_t> hits;
  for (int k : k_list) hits[k] = 0;
  int64_t included = 0;
  for (int64_t p = 0; p < m.num_probes; ++p) {
    std::vector<int64_t> order(static_cast<size_t>(S));
    std::iota(order.begin(), order.end(), 0);
    // Descending score; stable keeps ascending gallery index on ties.
    std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
      return m.at(p, a) > m.at(p, b);
    });
    std::vector<std::string> top;
    for (int k = 0; k < max_k; ++k)
      top.push_back(m.gallery_ids[static_cast<size_t>(order[static_cast<size_t>(k)])]);
    rep.topk.push_back(top);
    const std::string& truth = m.probe_ids[static_cast<size_t>(p)];
    bool enrolled = std::find(m.gallery_ids.begin(), m.gallery_ids.end(),
                              truth) != m.gallery_ids.end();
    if (!enrolled) {
      ++rep.excluded;
      continue;
    }
    ++included;
    for (int k : k_list) {
      int64_t kk = std::min<int64_t>(k, S);
      for (int64_t i = 0; i < kk; ++i) {
        if (m.gallery_ids[static_cast<size_t>(order[static_cast<size_t>(i)])] ==
            truth) {
          ++hits[k];
          break;
        }
      }
    }
  }
  require(included > 0, ErrorCode::invalid_argument,
          "no probe subject is enrolled in the gallery");
  for (int k : k_list)
    rep.rank_accuracy[k] =
        static_cast<double>(hits[k]) / static_cast<double>(included);
  return rep;
}

void export_score_matrix(const ScoreMatrix& m, const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), ErrorCode::io, "cannot write " + path);
  out << "probe_id";
  for (const auto& g : m.gallery_ids) out << "," << g;
  out << "\n";
  for (int64_t p = 0; p < m.num_probes; ++p) {
    out << m.probe_ids[static_cast<size_t>(p)];
    for (int64_t g = 0; g < m.num_gallery; ++g) out << "," << fmt(m.at(p, g));
    out << "\n";
  }
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

ScoreMatrix parse_score_matrix(const std::string& path) {
  std::ifstream in(path);
  require(in.is_open(), ErrorCode::io, "cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io,
          path + " is empty");
  ScoreMatrix m;
  {
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');  // "probe_id"
    while (std::getline(ss, field, ',')) m.gallery_ids.push_back(field);
  }
  m.num_gallery = static_cast<int64_t>(m.gallery_ids.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    m.probe_ids.push_back(field);
    int64_t count = 0;
    while (std::getline(ss, field, ',')) {
      m.scores.push_back(std::stod(field));
      ++count;
    }
    require(count == m.num_gallery, ErrorCode::io,
            path + ": row width mismatch");
  }
  m.num_probes = static_cast<int64_t>(m.probe_ids.size());
  return m;
}

void export_roc(const RocCurve& roc, const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), ErrorCode::io, "cannot write " + path);
  out << "far,tar\n";
  for (const auto& [far, tar] : roc.points)
    out << fmt(far) << "," << fmt(tar) << "\n";
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

void export_summary(const VerificationReport& r, const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), ErrorCode::io, "cannot write " + path);
  out << "auc,eer,tar_at_1pct_far,tar_at_5pct_far\n";
  out << fmt(r.auc) << "," << fmt(r.eer) << "," << fmt(r.tar_at_1pct_far)
      << "," << fmt(r.tar_at_5pct_far) << "\n";
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

void export_topk(const IdentificationReport& r,
                 const std::vector<std::string>& probe_ids,
                 const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), ErrorCode::io, "cannot write " + path);
  size_t k = r.topk.empty() ? 0 : r.topk[0].size();
  out << "probe_index,probe_id";
  for (size_t i = 1; i <= k; ++i) out << ",rank" << i;
  out << "\n";
  for (size_t p = 0; p < r.topk.size(); ++p) {
    out << p << "," << (p < probe_ids.size() ? probe_ids[p] : "");
    for (const auto& s : r.topk[p]) out << "," << s;
    out << "\n";
  }
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

}  // namespace dpif
