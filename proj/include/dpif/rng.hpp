// dpif/rng.hpp

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

#ifndef DPIF_RNG_HPP
#define DPIF_RNG_HPP

#include <cstdint>
#include <string_view>
#include <vector>

namespace dpif {

uint64_t fnv1a(std::string_view s);
uint64_t splitmix64(uint64_t& state);

/// Deterministic xoshiro256** generator. Self-contained so that streams
/// are byte-reproducible across platforms and standard-library versions
/// (std::*_distribution is implementation-defined).
class Rng {
 public:
  explicit Rng(uint64_t seed);

  /// Independent stream derived from (seed, tag, a, b). Used to key
  /// per-epoch / per-purpose streams so checkpoint resume replays the
  /// exact same draws.
  static Rng keyed(uint64_t seed, std::string_view tag, uint64_t a = 0,
                   uint64_t b = 0);

  uint64_t next();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  double normal();                         // standard normal, Box-Muller
  int64_t index(int64_t n);                // uniform in [0, n)

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates, fixed order.
    for (int64_t i = static_cast<int64_t>(v.size()) - 1; i > 0; --i) {
      int64_t j = index(i + 1);
      std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
    }
  }

 private:
  uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dpif

#endif  // DPIF_RNG_HPP
