// dpif/synth.cpp

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

#include "dpif/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "dpif/pnm.hpp"
#include "dpif/rng.hpp"

namespace dpif {

namespace {

namespace fs = std::filesystem;

struct Blob {
  double cx, cy, sx, sy, amp;
};

struct SubjectLatent {
  std::vector<Blob> blobs;
  double bg0, bg1;      // background ramp
  double tint[3];       // per-channel gains for the visible render
  bool owns_glasses = false;
};

SubjectLatent draw_subject(const SyntheticConfig& cfg, int subject_index) {
  Rng rng = Rng::keyed(cfg.seed, "synth.subject",
                       static_cast<uint64_t>(subject_index));
  SubjectLatent s;
  int nb = 6 + static_cast<int>(rng.index(4));
  for (int i = 0; i < nb; ++i) {
    Blob b;
    b.cx = rng.uniform(0.18, 0.82);
    b.cy = rng.uniform(0.18, 0.82);
    b.sx = rng.uniform(0.045, 0.14);
    b.sy = rng.uniform(0.045, 0.14);
    b.amp = rng.uniform(0.35, 0.95);
    s.blobs.push_back(b);
  }
  s.bg0 = rng.uniform(0.05, 0.20);
  s.bg1 = rng.uniform(-0.08, 0.08);
  for (double& t : s.tint) t = rng.uniform(0.75, 1.0);
  return s;
}

/// Blob field at (u, v) after the pose warp for `yaw`, rendered with an
/// extra isotropic widening of `sigma` (0 for visible, blur for thermal).
double field_at(const SubjectLatent& s, const std::vector<Blob>& jittered,
                double u, double v, double shear, double shift, double sigma2) {
  double uw = u + shear * (v - 0.5) + shift;
  double acc = 0.0;
  for (const Blob& b : jittered) {
    double dx = uw - b.cx;
    double dy = v - b.cy;
    double vx = b.sx * b.sx + sigma2;
    double vy = b.sy * b.sy + sigma2;
    acc += b.amp * std::exp(-0.5 * (dx * dx / vx + dy * dy / vy));
  }
  return acc + s.bg0 + s.bg1 * v;
}

uint8_t quantize(double v) {
  double c = std::min(1.0, std::max(0.0, v));
  return static_cast<uint8_t>(std::lround(c * 255.0));
}

struct RenderSpec {
  int subject_index;
  double yaw;
  int copy;
  bool glasses;
};

/// Renders the paired (visible ppm, thermal pgm) images of one cell.
void render_pair(const SyntheticConfig& cfg, const SubjectLatent& s,
                 const RenderSpec& r, const std::string& vis_path,
                 const std::string& thm_path) {
  const int N = cfg.image_size;
  // Geometry jitter shared by both spectra so rows stay identity-paired.
  Rng geom = Rng::keyed(cfg.seed, "synth.geom",
                        static_cast<uint64_t>(r.subject_index),
                        static_cast<uint64_t>(r.copy * 1024 +
                                              static_cast<int>(r.yaw) + 512));
  std::vector<Blob> jittered = s.blobs;
  for (Blob& b : jittered) {
    b.cx += geom.uniform(-0.012, 0.012);
    b.cy += geom.uniform(-0.012, 0.012);
    b.amp *= geom.uniform(0.95, 1.05);
  }
  const double yaw_rad = r.yaw * M_PI / 180.0;
  const double shear = 0.55 * std::sin(yaw_rad);
  const double shift = 0.18 * std::sin(yaw_rad);
  Rng vis_noise = Rng::keyed(cfg.seed, "synth.noise.vis",
                             static_cast<uint64_t>(r.subject_index),
                             static_cast<uint64_t>(r.copy * 1024 +
                                                   static_cast<int>(r.yaw) +
                                                   512));
  Rng thm_noise = Rng::keyed(cfg.seed, "synth.noise.thm",
                             static_cast<uint64_t>(r.subject_index),
                             static_cast<uint64_t>(r.copy * 1024 +
                                                   static_cast<int>(r.yaw) +
                                                   512));
  Image8 vis;
  vis.width = vis.height = N;
  vis.channels = 3;
  vis.pixels.resize(static_cast<size_t>(N) * N * 3);
  Image8 thm;
  thm.width = thm.height = N;
  thm.channels = 1;
  thm.pixels.resize(static_cast<size_t>(N) * N);
  const double sigma2 = cfg.blur_sigma * cfg.blur_sigma;
  auto glasses_band = [&](double u, double v) {
    if (!r.glasses) return 0.0;
    double dy = (v - 0.34) / 0.05;
    double extent = (u > 0.15 && u < 0.85) ? 1.0 : 0.0;
    return 0.55 * extent * std::exp(-0.5 * dy * dy);
  };
  for (int y = 0; y < N; ++y) {
    for (int x = 0; x < N; ++x) {
      double u = (x + 0.5) / N;
      double v = (y + 0.5) / N;
      double g = field_at(s, jittered, u, v, shear, shift, 0.0);
      g -= glasses_band(u, v);
      for (int c = 0; c < 3; ++c) {
        double val = g * s.tint[c] + cfg.noise_stddev * vis_noise.normal();
        vis.pixels[(static_cast<size_t>(y) * N + x) * 3 +
                   static_cast<size_t>(c)] = quantize(val);
      }
      // Thermal: smoothed field, inverted, gamma-warped.
      double gb = field_at(s, jittered, u, v, shear, shift, sigma2);
      gb -= glasses_band(u, v);
      double t = 1.0 - std::min(1.0, std::max(0.0, gb));
      t = std::pow(t, 1.6);
      t += cfg.noise_stddev * thm_noise.normal();
      thm.pixels[static_cast<size_t>(y) * N + x] = quantize(t);
    }
  }
  write_pnm(vis, vis_path);
  write_pnm(thm, thm_path);
}

std::string subject_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "S%03d", index + 1);
  return buf;
}

std::string yaw_tag(double yaw) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%+04d", static_cast<int>(std::lround(yaw)));
  return buf;
}

}  // namespace

SynthResult synth_generate(const SyntheticConfig& cfg,
                           const std::string& out_dir) {
  require(cfg.num_subjects >= 2, ErrorCode::invalid_argument,
          "synthetic config needs at least 2 subjects");
  require(cfg.num_train_subjects >= 1 &&
              cfg.num_train_subjects < cfg.num_subjects,
          ErrorCode::invalid_argument,
          "num_train_subjects must split the subject range");
  require(cfg.images_per_cell >= 1 && cfg.image_size >= 8,
          ErrorCode::invalid_argument, "bad synthetic geometry");
  require(!cfg.yaw_grid.empty(), ErrorCode::invalid_argument,
          "yaw grid must be non-empty");
  for (double yaw : cfg.yaw_grid)
    require(std::abs(yaw) <= 90.0, ErrorCode::invalid_argument,
            "yaw grid value outside [-90, 90]");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  require(!ec && fs::is_directory(fs::path(out_dir) / "images"),
          ErrorCode::io, "cannot create output directory " + out_dir);

  // Glasses owners are allotted per split so every probe/gallery variant
  // has imagery in both train and test whenever the fraction allows.
  const int test_subjects = cfg.num_subjects - cfg.num_train_subjects;
  const int owners_train = static_cast<int>(
      std::lround(cfg.glasses_fraction * cfg.num_train_subjects));
  const int owners_test =
      static_cast<int>(std::lround(cfg.glasses_fraction * test_subjects));
  SynthResult result;
  for (int si = 0; si < cfg.num_subjects; ++si) {
    SubjectLatent latent = draw_subject(cfg, si);
    latent.owns_glasses = si < cfg.num_train_subjects
                              ? si < owners_train
                              : (si - cfg.num_train_subjects) < owners_test;
    const std::string sid = subject_id(si);
    auto& bucket = si < cfg.num_train_subjects ? result.train : result.test;
    for (double yaw : cfg.yaw_grid) {
      bool frontal = std::abs(yaw) <= cfg.frontal_yaw_threshold;
      for (int copy = 0; copy < cfg.images_per_cell; ++copy) {
        std::string base = sid + "_y" + yaw_tag(yaw) + "_c" +
                           std::to_string(copy);
        std::string vis_rel = "images/" + base + "_vis.ppm";
        std::string thm_rel = "images/" + base + "_thm.pgm";
        RenderSpec rs{si, yaw, copy, false};
        render_pair(cfg, latent, rs, out_dir + "/" + vis_rel,
                    out_dir + "/" + thm_rel);
        result.images_written += 2;
        ManifestEntry vis;
        vis.subject_id = sid;
        vis.spectrum = Spectrum::visible;
        vis.pose_class = frontal ? PoseClass::frontal : PoseClass::off_pose;
        vis.yaw_degrees = yaw;
        vis.condition = frontal ? Condition::baseline : Condition::pose;
        vis.glasses = false;
        vis.path = vis_rel;
        ManifestEntry thm = vis;
        thm.spectrum = Spectrum::thermal;
        thm.path = thm_rel;
        bucket.push_back(vis);
        bucket.push_back(thm);
      }
    }
    if (latent.owns_glasses) {
      for (int copy = 0; copy < cfg.images_per_cell; ++copy) {
        std::string base = sid + "_eyewear_c" + std::to_string(copy);
        std::string vis_rel = "images/" + base + "_vis.ppm";
        std::string thm_rel = "images/" + base + "_thm.pgm";
        RenderSpec rs{si, 0.0, 1000 + copy, true};
        render_pair(cfg, latent, rs, out_dir + "/" + vis_rel,
                    out_dir + "/" + thm_rel);
        result.images_written += 2;
        ManifestEntry vis;
        vis.subject_id = sid;
        vis.spectrum = Spectrum::visible;
        vis.pose_class = PoseClass::frontal;
        vis.yaw_degrees = 0.0;
        vis.condition = Condition::eyewear;
        vis.glasses = true;
        vis.path = vis_rel;
        ManifestEntry thm = vis;
        thm.spectrum = Spectrum::thermal;
        thm.path = thm_rel;
        bucket.push_back(vis);
        bucket.push_back(thm);
      }
    }
  }
  save_manifest(result.train, out_dir + "/train_manifest.csv");
  save_manifest(result.test, out_dir + "/test_manifest.csv");
  return result;
}

}  // namespace dpif
