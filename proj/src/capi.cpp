// dpif/capi.cpp

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

#include "dpif.h"

#include <cstdlib>
#include <cstring>
#include <sstream>
#include <string>

#include "dpif/config.hpp"
#include "dpif/trainer.hpp"

using namespace dpif;

struct dpif_session {
  KvConfig kv;          // accumulated key/value overrides
  std::string last_error;

  RunConfig resolved() const { return RunConfig::from_kv(kv); }
};

namespace {

dpif_code code_of(const Error& e) {
  switch (e.code()) {
    case ErrorCode::invalid_argument: return DPIF_E_INVALID;
    case ErrorCode::shape_mismatch: return DPIF_E_SHAPE;
    case ErrorCode::io: return DPIF_E_IO;
    case ErrorCode::bad_magic:
    case ErrorCode::bad_version:
    case ErrorCode::truncated_file:
    case ErrorCode::record_mismatch: return DPIF_E_FORMAT;
    case ErrorCode::not_found: return DPIF_E_NOT_FOUND;
    case ErrorCode::state: return DPIF_E_STATE;
  }
  return DPIF_E_INTERNAL;
}

template <typename Fn>
dpif_code guarded(dpif_session* s, Fn&& fn) {
  if (!s) return DPIF_E_INVALID;
  try {
    fn();
    s->last_error.clear();
    return DPIF_OK;
  } catch (const Error& e) {
    s->last_error = e.what();
    return code_of(e);
  } catch (const std::exception& e) {
    s->last_error = e.what();
    return DPIF_E_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* dpif_version(void) { return "dpif 1.0.0"; }

dpif_session* dpif_session_new(void) { return new dpif_session(); }

void dpif_session_free(dpif_session* s) { delete s; }

dpif_code dpif_session_load_config(dpif_session* s, const char* path) {
  return guarded(s, [&] {
    require(path != nullptr, ErrorCode::invalid_argument, "null config path");
    KvConfig file = KvConfig::parse_file(path);
    for (const auto& [k, v] : file.items()) s->kv.set(k, v);
    (void)s->resolved();  // validate
  });
}

dpif_code dpif_session_set(dpif_session* s, const char* key,
                           const char* value) {
  return guarded(s, [&] {
    require(key && value, ErrorCode::invalid_argument, "null key or value");
    KvConfig trial = s->kv;
    trial.set(key, value);
    RunConfig check = RunConfig::from_kv(trial);  // validate before commit
    (void)check;
    s->kv = std::move(trial);
  });
}

char* dpif_session_config_echo(dpif_session* s) {
  if (!s) return nullptr;
  try {
    return dup_string(s->resolved().echo());
  } catch (const std::exception& e) {
    s->last_error = e.what();
    return nullptr;
  }
}

const char* dpif_session_last_error(const dpif_session* s) {
  return s ? s->last_error.c_str() : "null session";
}

dpif_code dpif_run_synth(dpif_session* s, const char* out_dir) {
  return guarded(s, [&] {
    require(out_dir != nullptr, ErrorCode::invalid_argument,
            "null output directory");
    RunConfig cfg = s->resolved();
    synth_generate(cfg.synth, out_dir);
  });
}

dpif_code dpif_run_train(dpif_session* s, const char* data_dir,
                         const char* out_dir, const char* resume_checkpoint) {
  return guarded(s, [&] {
    require(data_dir && out_dir, ErrorCode::invalid_argument,
            "null data or output directory");
    RunConfig cfg = s->resolved();
    run_training(cfg, data_dir, out_dir,
                 resume_checkpoint ? resume_checkpoint : "");
  });
}

dpif_code dpif_run_eval(dpif_session* s, const char* checkpoint,
                        const char* data_dir, const char* out_dir) {
  return guarded(s, [&] {
    require(checkpoint && data_dir && out_dir, ErrorCode::invalid_argument,
            "null checkpoint, data, or output path");
    RunConfig cfg = s->resolved();
    run_eval(checkpoint, data_dir, cfg.eval_gallery,
             split_csv(cfg.eval_probes), out_dir);
  });
}

dpif_code dpif_run_score_matrix(dpif_session* s, const char* checkpoint,
                                const char* data_dir, const char* out_path) {
  return guarded(s, [&] {
    require(checkpoint && data_dir && out_path, ErrorCode::invalid_argument,
            "null checkpoint, data, or output path");
    RunConfig cfg = s->resolved();
    auto probes = split_csv(cfg.eval_probes);
    require(!probes.empty(), ErrorCode::invalid_argument,
            "eval.probes selects no probe set");
    ScoreMatrix m = compute_score_matrix(checkpoint, data_dir,
                                         cfg.eval_gallery, probes[0]);
    export_score_matrix(m, out_path);
  });
}

dpif_code dpif_run_ablation(dpif_session* s, const char* kind,
                            const char* grid, const char* data_dir,
                            const char* out_dir) {
  return guarded(s, [&] {
    require(kind && grid && data_dir && out_dir, ErrorCode::invalid_argument,
            "null ablation argument");
    auto k = ablation_kind_from_name(kind);
    require(k.has_value(), ErrorCode::invalid_argument,
            std::string("unknown ablation kind '") + kind + "'");
    RunConfig cfg = s->resolved();
    run_ablation(*k, split_csv(grid), cfg, data_dir, out_dir);
  });
}

char* dpif_info_text(dpif_session* s) {
  if (!s) return nullptr;
  try {
    RunConfig cfg = s->resolved();
    std::ostringstream os;
    os << dpif_version() << "\n\n";
    os << "backbone truncation shape ledger (static trace):\n";
    for (Family f : {Family::vgg16, Family::resnet50, Family::tiny}) {
      BackboneSpec spec = BackboneSpec::make(
          f, BackboneSpec::truncation_points(f).back());
      for (const auto& [name, shape] : spec.boundary_shapes())
        os << "  " << family_name(f) << " " << name << " -> " << shape[0]
           << "x" << shape[1] << "x" << shape[2] << "\n";
    }
    os << "\nconfigured model: " << family_name(cfg.train.family) << " @ "
       << cfg.train.truncation << ", embedding " << cfg.train.embed_dim
       << ", " << cfg.train.groups << " filter groups\n";
    os << "\nresolved config:\n" << cfg.echo();
    s->last_error.clear();
    return dup_string(os.str());
  } catch (const std::exception& e) {
    s->last_error = e.what();
    return nullptr;
  }
}

void dpif_free(char* p) { std::free(p); }

}  // extern "C"
