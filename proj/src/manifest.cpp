// dpif/manifest.cpp

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

#include "dpif/manifest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dpif {

namespace {

constexpr const char* kHeader =
    "subject_id,spectrum,pose_class,yaw_degrees,condition,glasses,path";

Spectrum parse_spectrum(const std::string& s, int line) {
  if (s == "visible") return Spectrum::visible;
  if (s == "thermal") return Spectrum::thermal;
  fail(ErrorCode::invalid_argument,
       "manifest line " + std::to_string(line) + ": unknown spectrum '" + s +
           "'");
}

PoseClass parse_pose_class(const std::string& s, int line) {
  if (s == "frontal") return PoseClass::frontal;
  if (s == "off_pose") return PoseClass::off_pose;
  fail(ErrorCode::invalid_argument,
       "manifest line " + std::to_string(line) + ": unknown pose_class '" + s +
           "'");
}

Condition parse_condition(const std::string& s, int line) {
  if (s == "baseline") return Condition::baseline;
  if (s == "expression") return Condition::expression;
  if (s == "pose") return Condition::pose;
  if (s == "eyewear") return Condition::eyewear;
  fail(ErrorCode::invalid_argument,
       "manifest line " + std::to_string(line) + ": unknown condition '" + s +
           "'");
}

bool parse_bool(const std::string& s, int line) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(ErrorCode::invalid_argument,
       "manifest line " + std::to_string(line) + ": bad boolean '" + s + "'");
}

}  // namespace

const char* spectrum_name(Spectrum s) {
  return s == Spectrum::visible ? "visible" : "thermal";
}
const char* pose_class_name(PoseClass p) {
  return p == PoseClass::frontal ? "frontal" : "off_pose";
}
const char* condition_name(Condition c) {
  switch (c) {
    case Condition::baseline: return "baseline";
    case Condition::expression: return "expression";
    case Condition::pose: return "pose";
    case Condition::eyewear: return "eyewear";
  }
  return "?";
}

std::vector<ManifestEntry> load_manifest(const std::string& path,
                                         double frontal_threshold) {
  std::ifstream in(path);
  require(in.is_open(), ErrorCode::io, "cannot open manifest " + path);
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen_paths;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      require(line == kHeader, ErrorCode::invalid_argument,
              path + " line 1: expected header '" + kHeader + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    {
      std::stringstream ss(line);
      std::string f;
      while (std::getline(ss, f, ',')) fields.push_back(f);
      if (!line.empty() && line.back() == ',') fields.push_back("");
    }
    require(fields.size() == 7, ErrorCode::invalid_argument,
            path + " line " + std::to_string(line_no) + ": expected 7 fields, got " +
                std::to_string(fields.size()));
    ManifestEntry e;
    e.subject_id = fields[0];
    require(!e.subject_id.empty(), ErrorCode::invalid_argument,
            path + " line " + std::to_string(line_no) + ": empty subject_id");
    e.spectrum = parse_spectrum(fields[1], line_no);
    e.pose_class = parse_pose_class(fields[2], line_no);
    if (!fields[3].empty()) {
      try {
        e.yaw_degrees = std::stod(fields[3]);
      } catch (const std::exception&) {
        fail(ErrorCode::invalid_argument,
             path + " line " + std::to_string(line_no) + ": bad yaw '" +
                 fields[3] + "'");
      }
      require(std::abs(*e.yaw_degrees) <= 90.0, ErrorCode::invalid_argument,
              path + " line " + std::to_string(line_no) + ": |yaw| " +
                  fields[3] + " exceeds 90 degrees");
    }
    e.condition = parse_condition(fields[4], line_no);
    e.glasses = parse_bool(fields[5], line_no);
    e.path = fields[6];
    require(!e.path.empty(), ErrorCode::invalid_argument,
            path + " line " + std::to_string(line_no) + ": empty path");
    if (e.pose_class == PoseClass::frontal && e.yaw_degrees)
      require(std::abs(*e.yaw_degrees) <= frontal_threshold,
              ErrorCode::invalid_argument,
              path + " line " + std::to_string(line_no) +
                  ": frontal entry with |yaw| > " +
                  std::to_string(frontal_threshold));
    require(seen_paths.insert(e.path).second, ErrorCode::invalid_argument,
            path + " line " + std::to_string(line_no) + ": duplicate path " +
                e.path);
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path) {
  std::ofstream out(path);
  require(out.is_open(), ErrorCode::io, "cannot write manifest " + path);
  out << kHeader << "\n";
  for (const auto& e : entries) {
    out << e.subject_id << "," << spectrum_name(e.spectrum) << ","
        << pose_class_name(e.pose_class) << ",";
    if (e.yaw_degrees) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%g", *e.yaw_degrees);
      out << buf;
    }
    out << "," << condition_name(e.condition) << ","
        << (e.glasses ? "true" : "false") << "," << e.path << "\n";
  }
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

std::vector<ProtocolSpec> standard_specs() {
  using GR = ProtocolSpec::GlassesRule;
  std::vector<ProtocolSpec> specs;
  auto add = [&](std::string name, Role role, std::optional<Spectrum> sp,
                 std::optional<PoseClass> pc, std::optional<Condition> cond,
                 GR gr) {
    ProtocolSpec s;
    s.name = std::move(name);
    s.role = role;
    s.spectrum = sp;
    s.pose_class = pc;
    s.condition = cond;
    s.glasses_rule = gr;
    specs.push_back(std::move(s));
  };
  add("G_VB0-", Role::gallery, Spectrum::visible, PoseClass::frontal,
      Condition::baseline, GR::any);  // images without glasses, see below
  specs.back().glasses_rule = GR::any;
  add("G_VB0+", Role::gallery, Spectrum::visible, PoseClass::frontal,
      std::nullopt, GR::any);
  add("P_TB0", Role::probe, Spectrum::thermal, PoseClass::frontal,
      Condition::baseline, GR::subject_without);
  add("P_TB-", Role::probe, Spectrum::thermal, PoseClass::frontal,
      Condition::baseline, GR::owner_not_wearing);
  add("P_TB+", Role::probe, Spectrum::thermal, PoseClass::frontal,
      std::nullopt, GR::owner_wearing);
  add("P_TE0", Role::probe, Spectrum::thermal, std::nullopt,
      Condition::expression, GR::subject_without);
  add("P_TE-", Role::probe, Spectrum::thermal, std::nullopt,
      Condition::expression, GR::owner_not_wearing);
  add("P_TP0", Role::probe, Spectrum::thermal, PoseClass::off_pose,
      std::nullopt, GR::subject_without);
  add("P_TP-", Role::probe, Spectrum::thermal, PoseClass::off_pose,
      std::nullopt, GR::owner_not_wearing);
  return specs;
}

const std::vector<ManifestEntry>& Protocol::at(const std::string& name) const {
  auto it = sets.find(name);
  require(it != sets.end(), ErrorCode::not_found,
          "protocol has no set named " + name);
  return it->second;
}

Protocol build_protocol(const std::vector<ManifestEntry>& manifest,
                        const std::vector<ProtocolSpec>& specs) {
  std::set<std::string> owners;
  for (const auto& e : manifest)
    if (e.glasses) owners.insert(e.subject_id);
  Protocol proto;
  std::set<std::string> train_subjects, eval_subjects;
  for (const auto& spec : specs) {
    std::vector<ManifestEntry> selected;
    for (const auto& e : manifest) {
      if (spec.spectrum && e.spectrum != *spec.spectrum) continue;
      if (spec.pose_class && e.pose_class != *spec.pose_class) continue;
      if (spec.condition && e.condition != *spec.condition) continue;
      bool owner = owners.count(e.subject_id) > 0;
      switch (spec.glasses_rule) {
        case ProtocolSpec::GlassesRule::any:
          break;
        case ProtocolSpec::GlassesRule::subject_without:
          if (owner) continue;
          break;
        case ProtocolSpec::GlassesRule::owner_not_wearing:
          if (!owner || e.glasses) continue;
          break;
        case ProtocolSpec::GlassesRule::owner_wearing:
          if (!owner || !e.glasses) continue;
          break;
      }
      // Gallery naming: the '-' variant excludes any glasses imagery;
      // the '+' variant swaps in owners' glasses imagery.
      if (spec.name == "G_VB0-" && e.glasses) continue;
      if (spec.name == "G_VB0+") {
        if (owner != e.glasses) continue;
        if (!owner && e.condition != Condition::baseline) continue;
      }
      selected.push_back(e);
    }
    auto& bucket =
        spec.role == Role::train ? train_subjects : eval_subjects;
    for (const auto& e : selected) bucket.insert(e.subject_id);
    proto.sets[spec.name] = std::move(selected);
  }
  for (const auto& s : train_subjects)
    require(eval_subjects.count(s) == 0, ErrorCode::invalid_argument,
            "subject " + s + " appears in both train and gallery/probe sets");
  return proto;
}

std::set<std::string> subjects_of(const std::vector<ManifestEntry>& entries) {
  std::set<std::string> out;
  for (const auto& e : entries) out.insert(e.subject_id);
  return out;
}

Dataset Dataset::load(const std::string& dir, double frontal_threshold) {
  Dataset ds;
  ds.root = dir;
  ds.train = load_manifest(dir + "/train_manifest.csv", frontal_threshold);
  ds.test = load_manifest(dir + "/test_manifest.csv", frontal_threshold);
  auto train_subj = subjects_of(ds.train);
  auto test_subj = subjects_of(ds.test);
  for (const auto& s : train_subj)
    require(test_subj.count(s) == 0, ErrorCode::invalid_argument,
            "subject " + s + " appears in both train and test manifests");
  return ds;
}

}  // namespace dpif
