// dpif/eval.hpp

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

#ifndef DPIF_EVAL_HPP
#define DPIF_EVAL_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dpif/tensor.hpp"

namespace dpif {

/// Row-per-item embedding matrix with subject labels.
struct EmbeddingSet {
  Tensor vectors;  // [N, d]
  std::vector<std::string> subject_ids;
  std::vector<std::string> item_names;  // optional, for error reporting
};

/// a.b / (|a| |b|), computed in double. Errors on zero vectors.
double cosine_similarity(const Tensor& a, const Tensor& b);

/// Probe x gallery cosine similarities with per-row/column subject labels.
struct ScoreMatrix {
  int64_t num_probes = 0;
  int64_t num_gallery = 0;
  std::vector<double> scores;  // row-major
  std::vector<std::string> probe_ids;
  std::vector<std::string> gallery_ids;

  double at(int64_t p, int64_t g) const {
    return scores[static_cast<size_t>(p * num_gallery + g)];
  }
};

ScoreMatrix build_score_matrix(const EmbeddingSet& probes,
                               const EmbeddingSet& gallery);

/// Collapses gallery columns to one per subject by max score. Column
/// order is first appearance in the gallery.
ScoreMatrix fuse_gallery_by_subject(const ScoreMatrix& m);

/// (FAR, TAR) points from a threshold sweep over all distinct scores plus
/// +inf / -inf sentinels, ordered by decreasing threshold.
struct RocCurve {
  std::vector<std::pair<double, double>> points;
};

struct VerificationReport {
  double auc = 0.0;
  double eer = 0.0;
  double tar_at_1pct_far = 0.0;
  double tar_at_5pct_far = 0.0;
};

struct IdentificationReport {
  std::map<int, double> rank_accuracy;               // k -> fraction
  std::vector<std::vector<std::string>> topk;        // per probe
  int excluded = 0;  // probes whose subject is not enrolled
};

/// Gallery is subject-fused internally (max). Genuine pair: equal
/// subject ids. Errors when either pair class is empty.
RocCurve roc_curve(const ScoreMatrix& m);
VerificationReport verification_report(const ScoreMatrix& m);
VerificationReport report_from_roc(const RocCurve& roc);
double tar_at_far(const RocCurve& roc, double far);

IdentificationReport identification_report(const ScoreMatrix& m,
                                           const std::vector<int>& k_list);

// Comma-separated exports. Numeric fields use round-trip precision.
void export_score_matrix(const ScoreMatrix& m, const std::string& path);
ScoreMatrix parse_score_matrix(const std::string& path);
void export_roc(const RocCurve& roc, const std::string& path);
void export_summary(const VerificationReport& r, const std::string& path);
void export_topk(const IdentificationReport& r,
                 const std::vector<std::string>& probe_ids,
                 const std::string& path);

}  // namespace dpif

#endif  // DPIF_EVAL_HPP
