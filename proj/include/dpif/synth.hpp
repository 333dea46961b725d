// dpif/synth.hpp

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

#ifndef DPIF_SYNTH_HPP
#define DPIF_SYNTH_HPP

#include <string>
#include <vector>

#include "dpif/manifest.hpp"

namespace dpif {

/// Deterministic paired-spectrum face stand-in generator.
///
/// Each subject is a seeded constellation of Gaussian blobs over a
/// background ramp. Pose is a horizontal shear + shift of the blob field
/// parameterized by yaw; the thermal rendition of the same geometry is a
/// smoothed, intensity-inverted, gamma-warped version of the visible one,
/// so identity structure survives while raw pixel statistics diverge.
struct SyntheticConfig {
  uint64_t seed = 7;
  int num_subjects = 20;
  int num_train_subjects = 14;
  int images_per_cell = 3;  // per (subject, yaw, spectrum)
  int image_size = 32;
  std::vector<double> yaw_grid = {-60.0, -30.0, 0.0, 30.0, 60.0};
  double glasses_fraction = 0.2;  // fraction of subjects owning glasses
  double noise_stddev = 0.02;
  double blur_sigma = 0.06;  // thermal smoothing, in normalized units
  double frontal_yaw_threshold = 10.0;
};

struct SynthResult {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
  int images_written = 0;
};

/// Writes images under <out_dir>/images plus train/test manifest CSVs.
/// Pure function of (config): same config, byte-identical output.
SynthResult synth_generate(const SyntheticConfig& config,
                           const std::string& out_dir);

}  // namespace dpif

#endif  // DPIF_SYNTH_HPP
