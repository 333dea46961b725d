// dpif/manifest.hpp

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

#ifndef DPIF_MANIFEST_HPP
#define DPIF_MANIFEST_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpif/error.hpp"

namespace dpif {

enum class Spectrum { visible, thermal };
enum class PoseClass { frontal, off_pose };
enum class Condition { baseline, expression, pose, eyewear };

const char* spectrum_name(Spectrum s);
const char* pose_class_name(PoseClass p);
const char* condition_name(Condition c);

struct ManifestEntry {
  std::string subject_id;
  Spectrum spectrum = Spectrum::visible;
  PoseClass pose_class = PoseClass::frontal;
  std::optional<double> yaw_degrees;
  Condition condition = Condition::baseline;
  bool glasses = false;
  std::string path;  // relative to the dataset root
};

/// CSV schema, fixed header:
///   subject_id,spectrum,pose_class,yaw_degrees,condition,glasses,path
/// yaw_degrees may be empty. Rows are validated (|yaw| <= 90, frontal
/// implies |yaw| <= frontal_threshold, unique paths).
std::vector<ManifestEntry> load_manifest(const std::string& path,
                                         double frontal_threshold = 10.0);
void save_manifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path);

enum class Role { gallery, probe, train, validation };

/// Named filter over manifest entries. Glasses semantics mirror the
/// gallery/probe suffix convention: '0' selects subjects that never wear
/// glasses, '-' selects glasses owners photographed without them, '+'
/// selects owners wearing them.
struct ProtocolSpec {
  enum class GlassesRule { any, subject_without, owner_not_wearing,
                           owner_wearing };
  std::string name;
  Role role = Role::probe;
  std::optional<Spectrum> spectrum;
  std::optional<PoseClass> pose_class;
  std::optional<Condition> condition;
  GlassesRule glasses_rule = GlassesRule::any;
};

/// The standard protocol family: galleries G_VB0-, G_VB0+; baseline
/// probes P_TB0/-/+; expression probes P_TE0/-; pose probes P_TP0/-.
std::vector<ProtocolSpec> standard_specs();

struct Protocol {
  std::map<std::string, std::vector<ManifestEntry>> sets;

  const std::vector<ManifestEntry>& at(const std::string& name) const;
};

/// Applies every spec to the manifest. Errors when a subject lands in
/// both a train-role set and any gallery/probe set.
Protocol build_protocol(const std::vector<ManifestEntry>& manifest,
                        const std::vector<ProtocolSpec>& specs);

/// On-disk dataset: train/test manifest pair + image files.
struct Dataset {
  std::string root;
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;

  /// Loads <dir>/train_manifest.csv and <dir>/test_manifest.csv and
  /// enforces subject disjointness across the two.
  static Dataset load(const std::string& dir, double frontal_threshold = 10.0);
};

std::set<std::string> subjects_of(const std::vector<ManifestEntry>& entries);

}  // namespace dpif

#endif  // DPIF_MANIFEST_HPP
