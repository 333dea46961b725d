// dpif/pnm.cpp

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

#include "dpif/pnm.hpp"

#include <cmath>
#include <fstream>

namespace dpif {

namespace {

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Image8 read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.is_open(), ErrorCode::io, "cannot open image " + path);
  std::string magic = next_token(in);
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    fail(ErrorCode::bad_magic,
         path + ": not a P5/P6 portable pixmap (got '" + magic + "')");
  Image8 img;
  img.channels = channels;
  try {
    img.width = std::stoi(next_token(in));
    img.height = std::stoi(next_token(in));
    int maxval = std::stoi(next_token(in));
    require(maxval == 255, ErrorCode::invalid_argument,
            path + ": only 8-bit images supported (maxval 255)");
  } catch (const std::invalid_argument&) {
    fail(ErrorCode::io, path + ": malformed pixmap header");
  }
  require(img.width > 0 && img.height > 0, ErrorCode::invalid_argument,
          path + ": non-positive image dimensions");
  size_t n = static_cast<size_t>(img.width) * img.height * channels;
  img.pixels.resize(n);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(n));
  require(static_cast<size_t>(in.gcount()) == n, ErrorCode::truncated_file,
          path + ": pixel payload cut short");
  return img;
}

void write_pnm(const Image8& img, const std::string& path) {
  require(img.channels == 1 || img.channels == 3, ErrorCode::invalid_argument,
          "write_pnm: channels must be 1 or 3");
  std::ofstream out(path, std::ios::binary);
  require(out.is_open(), ErrorCode::io, "cannot write image " + path);
  out << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  require(out.good(), ErrorCode::io, "failed writing " + path);
}

Tensor load_image(const std::string& path, int target_size, bool standardize) {
  Image8 img = read_pnm(path);
  require(img.width == target_size && img.height == target_size,
          ErrorCode::shape_mismatch,
          path + ": image is " + std::to_string(img.width) + "x" +
              std::to_string(img.height) + ", expected " +
              std::to_string(target_size) + "x" + std::to_string(target_size));
  const int64_t H = img.height, W = img.width;
  Tensor out = Tensor::zeros({H, W, 3});
  auto& v = out.vals<float>();
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        uint8_t px =
            img.channels == 1
                ? img.pixels[static_cast<size_t>(y * W + x)]
                : img.pixels[static_cast<size_t>((y * W + x) * 3 + c)];
        v[static_cast<size_t>(idx3(y, x, c, W, 3))] =
            static_cast<float>(px) / 255.0f;
      }
  if (standardize) {
    for (int64_t c = 0; c < 3; ++c) {
      double mean = 0.0;
      for (int64_t i = 0; i < H * W; ++i)
        mean += v[static_cast<size_t>(i * 3 + c)];
      mean /= static_cast<double>(H * W);
      double var = 0.0;
      for (int64_t i = 0; i < H * W; ++i) {
        double d = v[static_cast<size_t>(i * 3 + c)] - mean;
        var += d * d;
      }
      var /= static_cast<double>(H * W);
      double inv = 1.0 / std::sqrt(var + 1e-8);
      for (int64_t i = 0; i < H * W; ++i) {
        auto& px = v[static_cast<size_t>(i * 3 + c)];
        px = static_cast<float>((px - mean) * inv);
      }
    }
  }
  return out;
}

}  // namespace dpif
