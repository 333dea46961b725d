// dpif/config.cpp

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

#include "dpif/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace dpif {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    require(pos == v.size(), ErrorCode::invalid_argument, "");
    return d;
  } catch (...) {
    fail(ErrorCode::invalid_argument,
         "config key " + key + ": bad numeric value '" + v + "'");
  }
}

int64_t to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long i = std::stoll(v, &pos);
    require(pos == v.size(), ErrorCode::invalid_argument, "");
    return i;
  } catch (...) {
    fail(ErrorCode::invalid_argument,
         "config key " + key + ": bad integer value '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorCode::invalid_argument,
       "config key " + key + ": bad boolean value '" + v + "'");
}

}  // namespace

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string f;
  while (std::getline(ss, f, ',')) {
    f = trim(f);
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : items_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  items_.emplace_back(key, value);
}

std::optional<std::string> KvConfig::get(const std::string& key) const {
  for (const auto& [k, v] : items_)
    if (k == key) return v;
  return std::nullopt;
}

KvConfig KvConfig::parse(const std::string& text) {
  KvConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::invalid_argument,
            "config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorCode::invalid_argument,
            "config line " + std::to_string(line_no) + ": empty key");
    cfg.set(key, value);
  }
  return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.is_open(), ErrorCode::io, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KvConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : items_) out += k + " = " + v + "\n";
  return out;
}

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::from_kv(const KvConfig& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv.items()) {
    if (key == "family") {
      auto f = family_from_name(value);
      require(f.has_value(), ErrorCode::invalid_argument,
              "config key family: unknown value '" + value + "'");
      cfg.train.family = *f;
    } else if (key == "truncation") {
      cfg.train.truncation = value;
    } else if (key == "embed_dim") {
      cfg.train.embed_dim = static_cast<int>(to_int(key, value));
    } else if (key == "groups") {
      cfg.train.groups = static_cast<int>(to_int(key, value));
    } else if (key == "f_inner") {
      cfg.train.f_inner = static_cast<int>(to_int(key, value));
    } else if (key == "activation_f" || key == "activation_g") {
      auto a = act_from_name(value);
      require(a.has_value(), ErrorCode::invalid_argument,
              "config key " + key + ": unknown activation '" + value + "'");
      (key == "activation_f" ? cfg.train.f_act : cfg.train.g_act) = *a;
    } else if (key == "phase1_epochs") {
      cfg.train.phase1_epochs = static_cast<int>(to_int(key, value));
    } else if (key == "phase2_epochs") {
      cfg.train.phase2_epochs = static_cast<int>(to_int(key, value));
    } else if (key == "lambda") {
      cfg.train.lambda = to_double(key, value);
    } else if (key == "batch_size") {
      cfg.train.batch_size = static_cast<int>(to_int(key, value));
    } else if (key == "optimizer") {
      if (value == "sgd")
        cfg.train.optim.kind = OptimKind::sgd;
      else if (value == "adaptive-moment" || value == "adam")
        cfg.train.optim.kind = OptimKind::adaptive_moment;
      else
        fail(ErrorCode::invalid_argument,
             "config key optimizer: unknown value '" + value + "'");
    } else if (key == "learning_rate") {
      cfg.train.optim.lr = to_double(key, value);
    } else if (key == "beta1") {
      cfg.train.optim.beta1 = to_double(key, value);
    } else if (key == "beta2") {
      cfg.train.optim.beta2 = to_double(key, value);
    } else if (key == "epsilon") {
      cfg.train.optim.eps = to_double(key, value);
    } else if (key == "seed") {
      cfg.train.seed = static_cast<uint64_t>(to_int(key, value));
    } else if (key == "detach_visible_in_pose_loss") {
      cfg.train.detach_visible_in_pose_loss = to_bool(key, value);
    } else if (key == "normalize_inputs") {
      cfg.train.normalize_inputs = to_bool(key, value);
    } else if (key == "frontal_yaw_threshold") {
      cfg.train.frontal_yaw_threshold = to_double(key, value);
    } else if (key == "synth.seed") {
      cfg.synth.seed = static_cast<uint64_t>(to_int(key, value));
    } else if (key == "synth.num_subjects") {
      cfg.synth.num_subjects = static_cast<int>(to_int(key, value));
    } else if (key == "synth.num_train_subjects") {
      cfg.synth.num_train_subjects = static_cast<int>(to_int(key, value));
    } else if (key == "synth.images_per_cell") {
      cfg.synth.images_per_cell = static_cast<int>(to_int(key, value));
    } else if (key == "synth.image_size") {
      cfg.synth.image_size = static_cast<int>(to_int(key, value));
    } else if (key == "synth.yaw_grid") {
      cfg.synth.yaw_grid.clear();
      for (const auto& s : split_csv(value))
        cfg.synth.yaw_grid.push_back(to_double(key, s));
    } else if (key == "synth.glasses_fraction") {
      cfg.synth.glasses_fraction = to_double(key, value);
    } else if (key == "synth.noise_stddev") {
      cfg.synth.noise_stddev = to_double(key, value);
    } else if (key == "synth.blur_sigma") {
      cfg.synth.blur_sigma = to_double(key, value);
    } else if (key == "eval.gallery") {
      cfg.eval_gallery = value;
    } else if (key == "eval.probes") {
      cfg.eval_probes = value;
    } else {
      fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
    }
  }
  cfg.synth.frontal_yaw_threshold = cfg.train.frontal_yaw_threshold;
  return cfg;
}

KvConfig RunConfig::to_kv() const {
  KvConfig kv;
  kv.set("family", family_name(train.family));
  kv.set("truncation", train.truncation);
  kv.set("embed_dim", std::to_string(train.embed_dim));
  kv.set("groups", std::to_string(train.groups));
  kv.set("f_inner", std::to_string(train.f_inner));
  kv.set("activation_f", act_name(train.f_act));
  kv.set("activation_g", act_name(train.g_act));
  kv.set("phase1_epochs", std::to_string(train.phase1_epochs));
  kv.set("phase2_epochs", std::to_string(train.phase2_epochs));
  kv.set("lambda", fmt_double(train.lambda));
  kv.set("batch_size", std::to_string(train.batch_size));
  kv.set("optimizer", train.optim.kind == OptimKind::sgd ? "sgd"
                                                         : "adaptive-moment");
  kv.set("learning_rate", fmt_double(train.optim.lr));
  kv.set("beta1", fmt_double(train.optim.beta1));
  kv.set("beta2", fmt_double(train.optim.beta2));
  kv.set("epsilon", fmt_double(train.optim.eps));
  kv.set("seed", std::to_string(train.seed));
  kv.set("detach_visible_in_pose_loss",
         train.detach_visible_in_pose_loss ? "true" : "false");
  kv.set("normalize_inputs", train.normalize_inputs ? "true" : "false");
  kv.set("frontal_yaw_threshold", fmt_double(train.frontal_yaw_threshold));
  kv.set("synth.seed", std::to_string(synth.seed));
  kv.set("synth.num_subjects", std::to_string(synth.num_subjects));
  kv.set("synth.num_train_subjects",
         std::to_string(synth.num_train_subjects));
  kv.set("synth.images_per_cell", std::to_string(synth.images_per_cell));
  kv.set("synth.image_size", std::to_string(synth.image_size));
  {
    std::string grid;
    for (size_t i = 0; i < synth.yaw_grid.size(); ++i) {
      if (i) grid += ",";
      grid += fmt_double(synth.yaw_grid[i]);
    }
    kv.set("synth.yaw_grid", grid);
  }
  kv.set("synth.glasses_fraction", fmt_double(synth.glasses_fraction));
  kv.set("synth.noise_stddev", fmt_double(synth.noise_stddev));
  kv.set("synth.blur_sigma", fmt_double(synth.blur_sigma));
  kv.set("eval.gallery", eval_gallery);
  kv.set("eval.probes", eval_probes);
  return kv;
}

}  // namespace dpif
