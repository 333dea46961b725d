// dpif/trainer.hpp

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

#ifndef DPIF_TRAINER_HPP
#define DPIF_TRAINER_HPP

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dpif/config.hpp"
#include "dpif/dpit.hpp"
#include "dpif/eval.hpp"
#include "dpif/losses.hpp"
#include "dpif/manifest.hpp"

namespace dpif {

/// One identity-paired training sample: an off-pose thermal image and a
/// frontal visible image of the same subject.
struct PairedSample {
  const ManifestEntry* thermal = nullptr;
  const ManifestEntry* visible = nullptr;
  int label = -1;
};

/// Seeded pairing of off-pose thermal images with same-identity frontal
/// visible partners. Every off-pose thermal image appears exactly once
/// per epoch; the partner is re-drawn each epoch; epoch order is a seeded
/// permutation.
class PairSampler {
 public:
  explicit PairSampler(const std::vector<ManifestEntry>& train_manifest);

  std::vector<PairedSample> epoch(uint64_t seed, int epoch_index) const;

  /// Sorted unique training subject ids; index = class label.
  const std::vector<std::string>& classes() const { return classes_; }
  int label_of(const std::string& subject) const;

 private:
  const std::vector<ManifestEntry>* manifest_;
  std::vector<std::string> classes_;
  std::vector<std::vector<size_t>> thermal_by_class_;
  std::vector<std::vector<size_t>> visible_by_class_;
};

/// Frozen-backbone feature memo: each image runs through the backbone
/// once, training batches are stacked from cached maps.
class FeatureCache {
 public:
  FeatureCache(std::shared_ptr<const Backbone> backbone, std::string root,
               bool standardize);

  /// [N, h, w, C] stack of the entries' backbone features.
  Tensor batch(const std::vector<const ManifestEntry*>& entries);
  Tensor single(const ManifestEntry& entry);

 private:
  std::shared_ptr<const Backbone> backbone_;
  std::string root_;
  bool standardize_;
  std::map<std::string, Tensor> cache_;
};

struct EpochStats {
  int phase = 0;
  int epoch = 0;  // 1-based within the phase
  double l_c = 0.0;
  double l_p = 0.0;
  double l = 0.0;
  double seconds = 0.0;
};

struct Checkpoint {
  Family family = Family::tiny;
  std::string truncation;
  int embed_dim = 0;
  int groups = 2;
  int f_inner = 200;
  Act f_act = Act::tanh;
  Act g_act = Act::relu;
  int num_classes = 0;
  std::vector<std::string> classes;
  int phase1_done = 0;
  int phase2_done = 0;
  uint64_t seed = 0;
  std::string config_echo;
  std::vector<EpochStats> history;
  WeightStore tensors;  // backbone.*, head.*, opt.*
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds the full model (frozen backbone + head) from a checkpoint.
DpitModel model_from_checkpoint(const Checkpoint& ckpt);

/// Serializes adaptive-moment state into / out of a store under "opt.".
void optimizer_state_to_store(const Optimizer& opt, WeightStore* store);
void optimizer_state_from_store(const WeightStore& store, Optimizer* opt);

class Trainer {
 public:
  Trainer(RunConfig cfg, Dataset dataset);

  /// Phase 1: visible identity classifier on frontal visible imagery.
  /// Phase 2: classifier frozen; thermal stream + shared layers under the
  /// joint loss. `on_epoch` (when set) runs after every epoch, e.g. to
  /// checkpoint.
  using EpochHook = std::function<void(const Trainer&, const EpochStats&)>;

  void train_phase1(int from_epoch = 0);
  void train_phase2(int from_epoch = 0);

  DpitModel& model() { return *model_; }
  const DpitModel& model() const { return *model_; }
  Optimizer& optimizer() { return opt_; }
  const std::vector<EpochStats>& history() const { return history_; }
  const PairSampler& sampler() const { return *sampler_; }
  const RunConfig& config() const { return cfg_; }

  Checkpoint make_checkpoint() const;
  void restore(const Checkpoint& ckpt);
  int phase1_done() const { return phase1_done_; }
  int phase2_done() const { return phase2_done_; }

  EpochHook on_epoch;

 private:
  Tensor visible_embeddings(const std::vector<const ManifestEntry*>& entries);
  Tensor thermal_embeddings(const std::vector<const ManifestEntry*>& entries);

  RunConfig cfg_;
  Dataset dataset_;
  std::shared_ptr<const Backbone> backbone_;
  std::unique_ptr<DpitModel> model_;
  std::unique_ptr<PairSampler> sampler_;
  std::unique_ptr<FeatureCache> features_;
  Optimizer opt_;
  std::vector<EpochStats> history_;
  int phase1_done_ = 0;
  int phase2_done_ = 0;
};

struct TrainOutcome {
  std::string checkpoint_path;
  std::vector<EpochStats> history;
  std::string config_echo;
};

/// synth (implicit caller) -> phase 1 -> phase 2 -> checkpoint + log.
/// Resumes from `resume_checkpoint` when non-empty.
TrainOutcome run_training(const RunConfig& cfg, const std::string& data_dir,
                          const std::string& out_dir,
                          const std::string& resume_checkpoint = "");

struct EvalRow {
  std::string probe_set;
  std::string gallery;
  VerificationReport verification;
  double rank1 = 0.0;
  double rank5 = 0.0;
  int excluded = 0;
};

struct EvalOutcome {
  std::vector<EvalRow> rows;
  std::string table_text;  // AUC(%) EER(%) TAR@1%FAR TAR@5%FAR table
};

EvalOutcome run_eval(const std::string& checkpoint_path,
                     const std::string& data_dir,
                     const std::string& gallery_name,
                     const std::vector<std::string>& probe_names,
                     const std::string& out_dir);

/// Probe-set x gallery cosine matrix for one named probe set.
ScoreMatrix compute_score_matrix(const std::string& checkpoint_path,
                                 const std::string& data_dir,
                                 const std::string& gallery_name,
                                 const std::string& probe_name);

enum class AblationKind {
  embedding_size,
  lambda_sweep,
  activation_combo,
  truncation_depth
};

struct AblationRow {
  std::string setting;
  VerificationReport verification;
  int64_t trainable_params = 0;
};

struct AblationOutcome {
  std::vector<AblationRow> rows;
  std::string table_path;
};

AblationOutcome run_ablation(AblationKind kind,
                             const std::vector<std::string>& grid,
                             const RunConfig& base, const std::string& data_dir,
                             const std::string& out_dir);

std::optional<AblationKind> ablation_kind_from_name(const std::string& s);

}  // namespace dpif

#endif  // DPIF_TRAINER_HPP
