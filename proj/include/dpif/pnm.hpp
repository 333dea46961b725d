// dpif/pnm.hpp

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

#ifndef DPIF_PNM_HPP
#define DPIF_PNM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "dpif/tensor.hpp"

namespace dpif {

/// 8-bit interleaved image; channels is 1 (PGM) or 3 (PPM).
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;
};

Image8 read_pnm(const std::string& path);
void write_pnm(const Image8& img, const std::string& path);

/// Decodes to [H, W, 3] f32 in [0, 1]; single-channel input is replicated
/// across the three channels. Errors when the decoded size differs from
/// `target_size`. With `standardize`, each channel is shifted/scaled to
/// zero mean, unit variance over the image.
Tensor load_image(const std::string& path, int target_size, bool standardize);

}  // namespace dpif

#endif  // DPIF_PNM_HPP
