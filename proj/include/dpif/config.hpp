// dpif/config.hpp

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

#ifndef DPIF_CONFIG_HPP
#define DPIF_CONFIG_HPP

#include <optional>
#include <string>
#include <vector>

#include "dpif/autodiff.hpp"
#include "dpif/backbone.hpp"
#include "dpif/synth.hpp"

namespace dpif {

/// Flat `key = value` text config. `#` starts a comment; keys may be
/// dotted. Parse order is preserved for echoing.
class KvConfig {
 public:
  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& items() const {
    return items_;
  }

  static KvConfig parse(const std::string& text);
  static KvConfig parse_file(const std::string& path);
  std::string serialize() const;

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

/// Two-phase training configuration. Epoch counts, lambda and embedding
/// size carry the reference recipe; the optimizer block has no reference
/// values and is echoed with the rest.
struct TrainConfig {
  Family family = Family::tiny;
  std::string truncation = "block3_pool";
  int embed_dim = 256;
  int groups = 2;
  int f_inner = 200;
  Act f_act = Act::tanh;
  Act g_act = Act::relu;
  int phase1_epochs = 5;
  int phase2_epochs = 100;
  double lambda = 1e-5;
  int batch_size = 32;
  OptimConfig optim;  // adaptive-moment, lr 1e-3
  uint64_t seed = 1;
  bool detach_visible_in_pose_loss = false;
  bool normalize_inputs = false;
  double frontal_yaw_threshold = 10.0;
};

/// Everything one run needs: training, synthesis, and eval selection.
struct RunConfig {
  TrainConfig train;
  SyntheticConfig synth;
  std::string eval_gallery = "G_VB0-";
  std::string eval_probes = "P_TP0,P_TP-";

  static RunConfig defaults();
  /// Unknown keys are rejected.
  static RunConfig from_kv(const KvConfig& kv);
  /// Fully-resolved echo, defaults included.
  KvConfig to_kv() const;
  std::string echo() const { return to_kv().serialize(); }
};

std::vector<std::string> split_csv(const std::string& s);

}  // namespace dpif

#endif  // DPIF_CONFIG_HPP
