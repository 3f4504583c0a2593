// Copyright 2026 The masstrace Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>

namespace masstrace {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits. Unlike
// std::uniform_real_distribution the result is identical across standard
// library implementations, which keeps decision logs reproducible.
inline double unit_double(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return unit_double(rng) < p;
}

// Uniform integer in [0, n). Uses rejection to avoid modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

// A point in the normalized (mean mass, low-percentile mass) plane.
using Point2 = std::array<double, 2>;

inline double norm(const Point2& p) { return std::hypot(p[0], p[1]); }

inline double distance(const Point2& a, const Point2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

}  // namespace masstrace
