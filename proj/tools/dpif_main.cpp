// tools/dpif_main.cpp

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

// Command-line frontend. Everything runs through the C API in dpif.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpif.h"

namespace {

struct SessionDeleter {
  void operator()(dpif_session* s) const { dpif_session_free(s); }
};
using SessionPtr = std::unique_ptr<dpif_session, SessionDeleter>;

// --config lookup: as given, then under $DPIF_CONFIG_DIR.
std::string resolve_config_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (fs::exists(path)) return path;
  const char* dir = std::getenv("DPIF_CONFIG_DIR");
  if (dir && *dir) {
    fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;  // let the library report the open failure
}

int fail_with(dpif_session* s, dpif_code code) {
  std::cerr << "error: " << dpif_session_last_error(s) << "\n";
  return code == DPIF_OK ? 0 : 1;
}

bool apply(dpif_session* s, const std::string& key, const std::string& value) {
  if (dpif_session_set(s, key.c_str(), value.c_str()) != DPIF_OK) {
    std::cerr << "error: " << dpif_session_last_error(s) << "\n";
    return false;
  }
  return true;
}

void print_echo(dpif_session* s) {
  char* echo = dpif_session_config_echo(s);
  if (echo) {
    std::cout << "# resolved configuration\n" << echo << std::flush;
    dpif_free(echo);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DPIF: pose- and domain-invariant cross-spectrum face "
               "verification kit"};
  app.require_subcommand(1);
  // Global options (--config / --set) may appear after the verb too.
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path,
                 "key=value config file (also searched in $DPIF_CONFIG_DIR)");
  app.add_option("--set", overrides, "extra config override, key=value");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  std::string synth_seed;
  synth->add_option("--out", synth_out, "output dataset directory")
      ->required();
  synth->add_option("--seed", synth_seed, "synthesis seed");

  // train
  auto* train = app.add_subcommand("train", "run two-phase training");
  std::string train_data, train_out, train_resume;
  std::string t_seed, t_lambda, t_p1, t_p2, t_dim, t_batch, t_family,
      t_trunc, t_lr;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--resume", train_resume, "checkpoint to resume from");
  train->add_option("--seed", t_seed, "training seed");
  train->add_option("--lambda", t_lambda, "pose-correction loss weight");
  train->add_option("--phase1-epochs", t_p1, "visible classifier epochs");
  train->add_option("--phase2-epochs", t_p2, "thermal stream epochs");
  train->add_option("--embed-dim", t_dim, "embedding size");
  train->add_option("--batch-size", t_batch, "batch size");
  train->add_option("--family", t_family, "backbone family");
  train->add_option("--truncation", t_trunc, "backbone truncation boundary");
  train->add_option("--learning-rate", t_lr, "optimizer learning rate");

  // eval
  auto* eval = app.add_subcommand("eval", "verification + identification");
  std::string eval_ckpt, eval_data, eval_out, eval_gallery, eval_probes;
  eval->add_option("--checkpoint", eval_ckpt, "trained checkpoint")
      ->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--gallery", eval_gallery, "gallery set name");
  eval->add_option("--probes", eval_probes, "comma list of probe set names");

  // score-matrix
  auto* score = app.add_subcommand("score-matrix",
                                   "export one probe/gallery score matrix");
  std::string sm_ckpt, sm_data, sm_out, sm_gallery, sm_probes;
  score->add_option("--checkpoint", sm_ckpt, "trained checkpoint")->required();
  score->add_option("--data", sm_data, "dataset directory")->required();
  score->add_option("--out", sm_out, "output csv path")->required();
  score->add_option("--gallery", sm_gallery, "gallery set name");
  score->add_option("--probes", sm_probes, "probe set name");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "grid of train+eval runs");
  std::string ab_kind, ab_grid, ab_data, ab_out;
  ablate->add_option("--kind", ab_kind,
                     "embedding | lambda | activation | truncation")
      ->required();
  ablate->add_option("--grid", ab_grid, "comma list of grid values")
      ->required();
  ablate->add_option("--data", ab_data, "dataset directory")->required();
  ablate->add_option("--out", ab_out, "output directory")->required();

  // info
  auto* info = app.add_subcommand("info", "print version and shape ledger");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage error
  }

  SessionPtr session(dpif_session_new());
  dpif_session* s = session.get();
  if (!config_path.empty()) {
    std::string resolved = resolve_config_path(config_path);
    if (dpif_session_load_config(s, resolved.c_str()) != DPIF_OK)
      return fail_with(s, DPIF_E_IO);
  }
  for (const auto& kv : overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return 2;
    }
    if (!apply(s, kv.substr(0, eq), kv.substr(eq + 1))) return 1;
  }

  if (synth->parsed()) {
    if (!synth_seed.empty() && !apply(s, "synth.seed", synth_seed)) return 1;
    print_echo(s);
    dpif_code rc = dpif_run_synth(s, synth_out.c_str());
    if (rc != DPIF_OK) return fail_with(s, rc);
    std::cout << "dataset written to " << synth_out << "\n";
    return 0;
  }

  if (train->parsed()) {
    const std::pair<const char*, std::string*> flags[] = {
        {"seed", &t_seed},          {"lambda", &t_lambda},
        {"phase1_epochs", &t_p1},   {"phase2_epochs", &t_p2},
        {"embed_dim", &t_dim},      {"batch_size", &t_batch},
        {"family", &t_family},      {"truncation", &t_trunc},
        {"learning_rate", &t_lr},
    };
    for (const auto& [key, value] : flags)
      if (!value->empty() && !apply(s, key, *value)) return 1;
    print_echo(s);
    dpif_code rc = dpif_run_train(
        s, train_data.c_str(), train_out.c_str(),
        train_resume.empty() ? nullptr : train_resume.c_str());
    if (rc != DPIF_OK) return fail_with(s, rc);
    std::cout << "checkpoint written to " << train_out << "/checkpoint.dpif\n";
    return 0;
  }

  if (eval->parsed()) {
    if (!eval_gallery.empty() && !apply(s, "eval.gallery", eval_gallery))
      return 1;
    if (!eval_probes.empty() && !apply(s, "eval.probes", eval_probes))
      return 1;
    print_echo(s);
    dpif_code rc =
        dpif_run_eval(s, eval_ckpt.c_str(), eval_data.c_str(), eval_out.c_str());
    if (rc != DPIF_OK) return fail_with(s, rc);
    std::ifstream table(eval_out + "/verification_table.csv");
    std::cout << table.rdbuf();
    return 0;
  }

  if (score->parsed()) {
    if (!sm_gallery.empty() && !apply(s, "eval.gallery", sm_gallery)) return 1;
    if (!sm_probes.empty() && !apply(s, "eval.probes", sm_probes)) return 1;
    print_echo(s);
    dpif_code rc = dpif_run_score_matrix(s, sm_ckpt.c_str(), sm_data.c_str(),
                                         sm_out.c_str());
    if (rc != DPIF_OK) return fail_with(s, rc);
    std::cout << "score matrix written to " << sm_out << "\n";
    return 0;
  }

  if (ablate->parsed()) {
    print_echo(s);
    dpif_code rc = dpif_run_ablation(s, ab_kind.c_str(), ab_grid.c_str(),
                                     ab_data.c_str(), ab_out.c_str());
    if (rc != DPIF_OK) return fail_with(s, rc);
    std::cout << "ablation table written to " << ab_out << "/ablation.csv\n";
    return 0;
  }

  if (info->parsed()) {
    char* text = dpif_info_text(s);
    if (!text) return fail_with(s, DPIF_E_INTERNAL);
    std::cout << text;
    dpif_free(text);
    return 0;
  }

  return 2;
}
