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

// Test-only reference implementations. Each one computes the same quantity
// as a library routine by a different, deliberately naive route.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "masstrace/hst_forest.hpp"

namespace masstrace::oracle {

// Axis-aligned box of every node, rebuilt from the workspace and the
// left-is-lower child convention, independent of HalfSpaceTree traversal.
struct NodeBox {
  std::vector<double> low, high;
};

inline std::vector<NodeBox> node_boxes(const HalfSpaceTree& tree) {
  const auto& nodes = tree.nodes();
  std::vector<NodeBox> boxes(nodes.size());
  boxes[0] = {tree.workspace_low(), tree.workspace_high()};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.is_leaf()) continue;
    const auto q = tree.split_dims()[n.level];
    const double mid = 0.5 * (boxes[i].low[q] + boxes[i].high[q]);
    boxes[n.left] = boxes[i];
    boxes[n.left].high[q] = mid;
    boxes[n.right] = boxes[i];
    boxes[n.right].low[q] = mid;
  }
  return boxes;
}

// Number of points inside each node's half-open box.
inline std::vector<std::uint64_t> recount_masses(const HalfSpaceTree& tree,
                                                 const std::vector<ScaledVector>& points) {
  const auto boxes = node_boxes(tree);
  std::vector<std::uint64_t> mass(boxes.size(), 0);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (const auto& p : points) {
      bool inside = true;
      for (std::size_t q = 0; q < p.size() && inside; ++q)
        inside = p[q] >= boxes[i].low[q] && p[q] < boxes[i].high[q];
      mass[i] += inside;
    }
  }
  return mass;
}

// Water level by bisection: sum_i min(size_i, level) == budget.
inline std::vector<double> water_fill(const std::vector<double>& sizes, double budget) {
  double lo = 0.0, hi = 0.0;
  for (double s : sizes) hi = std::max(hi, s);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double total = 0.0;
    for (double s : sizes) total += std::min(s, mid);
    (total < budget ? lo : hi) = mid;
  }
  std::vector<double> out;
  for (double s : sizes) out.push_back(std::min(s, hi));
  return out;
}

// Textbook DBSCAN with a full neighbor scan per point.
template <class Point, class Dist>
std::vector<std::size_t> naive_dbscan(const std::vector<Point>& pts, double eps,
                                      std::size_t minpts, Dist dist) {
  const std::size_t n = pts.size();
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  constexpr std::size_t kNoise = static_cast<std::size_t>(-2);
  std::vector<std::size_t> label(n, kUnset);
  auto region = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (dist(pts[i], pts[j]) <= eps) out.push_back(j);
    return out;
  };
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (label[i] != kUnset) continue;
    auto nb = region(i);
    if (nb.size() < minpts) {
      label[i] = kNoise;
      continue;
    }
    label[i] = c;
    std::vector<std::size_t> seeds(nb.begin(), nb.end());
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const std::size_t j = seeds[k];
      if (label[j] == kNoise) label[j] = c;
      if (label[j] != kUnset) continue;
      label[j] = c;
      auto nb2 = region(j);
      if (nb2.size() >= minpts) seeds.insert(seeds.end(), nb2.begin(), nb2.end());
    }
    ++c;
  }
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = label[i] == kNoise ? c++ : label[i];
  return out;
}

// Same partition up to renaming of group ids.
inline bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

}  // namespace masstrace::oracle
