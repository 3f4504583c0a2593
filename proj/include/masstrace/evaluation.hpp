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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "masstrace/common.hpp"
#include "masstrace/trace_model.hpp"

namespace masstrace {

inline bool operator<(const CountVector& a, const CountVector& b) {
  return a.entries < b.entries;
}

inline double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double euclidean(const CountVector& a, const CountVector& b) {
  double s = 0.0;
  auto i = a.entries.begin();
  auto j = b.entries.begin();
  while (i != a.entries.end() || j != b.entries.end()) {
    double diff;
    if (j == b.entries.end() || (i != a.entries.end() && i->first < j->first)) {
      diff = i->second;
      ++i;
    } else if (i == a.entries.end() || j->first < i->first) {
      diff = j->second;
      ++j;
    } else {
      diff = static_cast<double>(i->second) - static_cast<double>(j->second);
      ++i;
      ++j;
    }
    s += diff * diff;
  }
  return std::sqrt(s);
}

// Density-based clustering. Returns one group label per point: clusters are
// numbered 0.. in discovery order, then every noise point gets a singleton
// group of its own. Neighborhoods are closed balls (distance <= eps) and
// include the point itself.
//
// Identical points share neighborhoods, so the neighbor search runs over
// distinct points only; labels are the same as the point-by-point algorithm.
template <class Point>
std::vector<std::size_t> dbscan(std::span<const Point> points, double eps,
                                std::size_t minpts) {
  const std::size_t n = points.size();
  std::map<Point, std::size_t> distinct_index;
  std::vector<std::size_t> group_of(n);
  std::vector<std::size_t> representative;
  std::vector<std::size_t> multiplicity;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = distinct_index.try_emplace(points[i], representative.size());
    if (inserted) {
      representative.push_back(i);
      multiplicity.push_back(0);
    }
    group_of[i] = it->second;
    ++multiplicity[it->second];
  }

  const std::size_t u = representative.size();
  std::vector<std::vector<std::size_t>> neighbors(u);
  std::vector<std::size_t> weight(u, 0);
  for (std::size_t a = 0; a < u; ++a) {
    for (std::size_t b = 0; b < u; ++b) {
      if (euclidean(points[representative[a]], points[representative[b]]) <= eps) {
        neighbors[a].push_back(b);
        weight[a] += multiplicity[b];
      }
    }
  }

  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> label(u, kUnset);
  std::size_t clusters = 0;
  // Distinct points are visited in first-occurrence order, which is the
  // order the point-by-point algorithm would first meet them.
  for (std::size_t a = 0; a < u; ++a) {
    if (label[a] != kUnset || weight[a] < minpts) continue;
    const std::size_t id = clusters++;
    label[a] = id;
    std::deque<std::size_t> frontier{a};
    while (!frontier.empty()) {
      const std::size_t cur = frontier.front();
      frontier.pop_front();
      if (weight[cur] < minpts) continue;
      for (std::size_t nb : neighbors[cur]) {
        if (label[nb] != kUnset) continue;
        label[nb] = id;
        frontier.push_back(nb);
      }
    }
  }

  std::vector<std::size_t> out(n);
  std::size_t next_singleton = clusters;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t l = label[group_of[i]];
    out[i] = l == kUnset ? next_singleton++ : l;
  }
  return out;
}

inline std::vector<std::size_t> group_sizes(std::span<const std::size_t> labels) {
  std::size_t groups = 0;
  for (auto l : labels) groups = std::max(groups, l + 1);
  std::vector<std::size_t> sizes(groups, 0);
  for (auto l : labels) ++sizes[l];
  return sizes;
}

// Flags whole groups as anomalous, smallest first, while the flagged share of
// points stays within `quota`.
inline std::vector<bool> flag_smallest_groups(std::span<const std::size_t> labels,
                                              double quota = 0.05) {
  const auto sizes = group_sizes(labels);
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
  const double limit = quota * static_cast<double>(labels.size());
  std::vector<bool> anomalous_group(sizes.size(), false);
  std::size_t taken = 0;
  for (auto g : order) {
    if (sizes[g] == 0) continue;
    if (static_cast<double>(taken + sizes[g]) > limit) break;
    taken += sizes[g];
    anomalous_group[g] = true;
  }
  std::vector<bool> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = anomalous_group[labels[i]];
  return out;
}

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline ClassificationMetrics classification_metrics(const std::vector<bool>& kept,
                                                    const std::vector<bool>& anomalous) {
  if (kept.size() != anomalous.size())
    throw std::invalid_argument("kept and label vectors differ in length");
  std::size_t kept_n = 0, anomalous_n = 0, hits = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    kept_n += kept[i];
    anomalous_n += anomalous[i];
    hits += kept[i] && anomalous[i];
  }
  ClassificationMetrics m;
  if (kept_n > 0) m.precision = static_cast<double>(hits) / static_cast<double>(kept_n);
  if (anomalous_n > 0) m.recall = static_cast<double>(hits) / static_cast<double>(anomalous_n);
  if (m.precision + m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

// Max-min fair (water-filling) split of `budget` across groups capped by
// their sizes.
inline std::vector<double> maxmin_fair(std::span<const double> sizes, double budget) {
  double total = 0.0;
  for (double s : sizes) {
    if (s < 0.0) throw std::invalid_argument("group sizes must be non-negative");
    total += s;
  }
  if (budget < 0.0) throw std::invalid_argument("budget must be non-negative");
  if (budget > total * (1.0 + 1e-12))
    throw std::invalid_argument("budget exceeds total population");

  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sizes[a] < sizes[b]; });
  std::vector<double> alloc(sizes.size(), 0.0);
  double left = budget;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double share = left / static_cast<double>(order.size() - k);
    const std::size_t g = order[k];
    if (sizes[g] <= share) {
      alloc[g] = sizes[g];
      left -= sizes[g];
    } else {
      for (std::size_t r = k; r < order.size(); ++r) alloc[order[r]] = share;
      break;
    }
  }
  return alloc;
}

// Jain index over X_i = sampled_i / optimal_i. Groups with optimal_i = 0 are
// left out; an all-zero X gives 0.
inline double jain(std::span<const double> sampled, std::span<const double> optimal) {
  if (sampled.size() != optimal.size())
    throw std::invalid_argument("sampled and optimal vectors differ in length");
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    if (!(optimal[i] > 0.0)) continue;
    const double x = sampled[i] / optimal[i];
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("jain needs at least one group with optimal > 0");
  if (sum_sq == 0.0) return 0.0;
  return sum * sum / (static_cast<double>(n) * sum_sq);
}

// Head-style baseline: every trace kept independently with probability
// `budget`.
inline std::vector<bool> uniform_sampler(std::size_t n, double budget, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<bool> kept(n);
  for (std::size_t i = 0; i < n; ++i) kept[i] = bernoulli(rng, budget);
  return kept;
}

struct EvaluationRow {
  double budget = 0.0;
  double jain = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Scores one sampling run against ground-truth groups. The fair optimum
// allocates budget * N traces across groups.
inline EvaluationRow evaluate_run(double budget, const std::vector<bool>& kept,
                                  std::span<const std::size_t> groups,
                                  const std::vector<bool>& anomalous) {
  if (groups.size() != kept.size())
    throw std::invalid_argument("kept and group vectors differ in length");
  EvaluationRow row;
  row.budget = budget;
  const auto m = classification_metrics(kept, anomalous);
  row.precision = m.precision;
  row.recall = m.recall;
  row.f1 = m.f1;
  if (groups.empty()) return row;

  const auto sizes_n = group_sizes(groups);
  std::vector<double> sizes(sizes_n.begin(), sizes_n.end());
  std::vector<double> sampled(sizes.size(), 0.0);
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (kept[i]) sampled[groups[i]] += 1.0;
  const auto optimal = maxmin_fair(sizes, budget * static_cast<double>(groups.size()));
  row.jain = jain(sampled, optimal);
  return row;
}

}  // namespace masstrace
