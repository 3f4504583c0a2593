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

// Budgeted keep/discard decisions over a stream of mass summaries.
//
// The stream is cut into windows of `window` traces; each window may keep at
// most ceil(budget * window) of them. Per trace the controller scales the
// scores, re-locates cluster centers if the scaling bounds moved, assigns the
// trace to a cluster and, while quota remains, keeps it when its cluster is
// in the selection pool: the low-mass clusters nearest the origin that
// together hold a `theta` share of the population. A trace founding a new
// cluster is always kept.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "masstrace/common.hpp"
#include "masstrace/hst_forest.hpp"
#include "masstrace/mass_clustering.hpp"

namespace masstrace {

// How the first phase decides when the threshold theta is reached.
enum class PoolFill {
  // Stop before the cluster that would push coverage past theta. The nearest
  // cluster always gets in.
  kWithin,
  // Keep adding until coverage is at least theta.
  kReach,
};

struct ControllerConfig {
  double budget = 0.05;
  std::size_t window = 2000;
  std::optional<double> theta;  // pool threshold; defaults to the budget
  double alpha = 1.0;
  PoolFill pool_fill = PoolFill::kWithin;
  std::uint64_t seed = 42;
  ClusteringConfig clustering;
  double log_base = ScoreScaler::kDefaultLogBase;

  double pool_threshold() const { return theta.value_or(budget); }

  void validate() const {
    if (!(budget > 0.0 && budget < 1.0))
      throw std::invalid_argument("budget must lie in (0, 1)");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    const double th = pool_threshold();
    if (!(th > 0.0 && th <= 1.0)) throw std::invalid_argument("theta must lie in (0, 1]");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    clustering.validate();
  }
};

inline std::size_t window_target(double budget, std::size_t window) {
  // The small offset keeps products like 0.05 * 2000 from rounding up.
  return static_cast<std::size_t>(
      std::ceil(budget * static_cast<double>(window) - 1e-9));
}

struct WindowState {
  std::size_t window = 1;
  std::size_t position = 0;  // 1-based index of the current trace
  std::size_t target = 0;
  std::size_t remaining = 0;

  static WindowState start(double budget, std::size_t window) {
    const std::size_t target = window_target(budget, window);
    return {window, 0, target, target};
  }

  double relative_position() const {
    return std::min(1.0, static_cast<double>(position) / static_cast<double>(window));
  }
  double utilization() const {
    if (target == 0) return 1.0;
    return static_cast<double>(target - remaining) / static_cast<double>(target);
  }
};

// Starts the next window. Unused quota is dropped, not carried over.
inline void adjust_parameters(WindowState& state) {
  if (state.position <= state.window)
    throw std::logic_error("window rollover requested before the window ended");
  state.position = 1;
  state.remaining = state.target;
}

// Sampling eagerness R (1 - U).
inline double eagerness(double relative_position, double utilization) {
  return relative_position * (1.0 - utilization);
}

// Cluster ids by ascending centroid distance to the origin, oldest first on
// ties.
inline std::vector<std::uint64_t> rank_clusters(const std::vector<Cluster>& clusters) {
  std::vector<const Cluster*> order;
  order.reserve(clusters.size());
  for (const auto& c : clusters) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const Cluster* a, const Cluster* b) {
    const double da = norm(a->centroid);
    const double db = norm(b->centroid);
    if (da != db) return da < db;
    if (a->created_seq != b->created_seq) return a->created_seq < b->created_seq;
    return a->id < b->id;
  });
  std::vector<std::uint64_t> ids;
  ids.reserve(order.size());
  for (const auto* c : order) ids.push_back(c->id);
  return ids;
}

// Number of probabilistic top-up attempts, floor((budget - coverage) /
// coverage + 1/2), never negative.
inline std::size_t extra_attempts(double budget, double coverage) {
  if (!(coverage > 0.0)) throw std::domain_error("pool coverage must be positive");
  // Absorb rounding on exact half-integers, e.g. budget 0.1 and coverage 0.04.
  const double m = std::floor((budget - coverage) / coverage + 0.5 + 1e-9);
  return m > 0.0 ? static_cast<std::size_t>(m) : 0;
}

// Multiplier k such that, by Chebyshev, at least budget/coverage of the
// sizes lie within k standard deviations of the mean.
inline double chebyshev_k(double budget, double coverage) {
  if (!(coverage > budget))
    throw std::domain_error("chebyshev_k requires coverage > budget");
  return std::sqrt(coverage / (coverage - budget));
}

inline double sampling_probability(double cluster_size, double size_mean,
                                   double size_stddev, double budget, double coverage) {
  if (!(coverage > 0.0)) throw std::domain_error("pool coverage must be positive");
  if (budget >= coverage) return 1.0;
  const double k = chebyshev_k(budget, coverage);
  return cluster_size > size_mean + k * size_stddev ? budget / coverage : 1.0;
}

struct SelectionPool {
  std::vector<std::uint64_t> ids;
  double coverage = 0.0;  // share of the live population inside the pool
  double size_mean = 0.0;
  double size_stddev = 0.0;  // population standard deviation

  bool contains(std::uint64_t id) const {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
  }
};

inline SelectionPool build_selection_pool(const std::vector<Cluster>& clusters,
                                          double budget, double eagerness_value,
                                          double theta, double alpha, Rng& rng,
                                          PoolFill fill = PoolFill::kWithin) {
  if (clusters.empty()) throw std::invalid_argument("selection pool needs a live cluster");
  double total = 0.0;
  for (const auto& c : clusters) total += static_cast<double>(c.count);
  auto size_of = [&](std::uint64_t id) {
    for (const auto& c : clusters)
      if (c.id == id) return static_cast<double>(c.count);
    return 0.0;
  };

  const auto ranked = rank_clusters(clusters);
  SelectionPool pool;
  double covered = 0.0;
  std::size_t next = 0;
  while (next < ranked.size()) {
    const double size = size_of(ranked[next]);
    if (fill == PoolFill::kReach ? covered / total >= theta
                                 : next > 0 && (covered + size) / total > theta)
      break;
    covered += size;
    pool.ids.push_back(ranked[next]);
    ++next;
  }
  pool.coverage = covered / total;

  if (pool.coverage < alpha * budget) {
    const std::size_t attempts = extra_attempts(budget, pool.coverage);
    const double p = std::max(budget, eagerness_value);
    for (std::size_t k = 1; k <= attempts && next + k - 1 < ranked.size(); ++k) {
      if (bernoulli(rng, std::pow(p, static_cast<double>(k)))) {
        const auto id = ranked[next + k - 1];
        covered += size_of(id);
        pool.ids.push_back(id);
      }
    }
    pool.coverage = covered / total;
  }

  double sum = 0.0;
  for (auto id : pool.ids) sum += size_of(id);
  pool.size_mean = sum / static_cast<double>(pool.ids.size());
  double var = 0.0;
  for (auto id : pool.ids) {
    const double dev = size_of(id) - pool.size_mean;
    var += dev * dev;
  }
  pool.size_stddev = std::sqrt(var / static_cast<double>(pool.ids.size()));
  return pool;
}

struct Decision {
  bool kept = false;
  std::uint64_t cluster_id = 0;
  bool is_new = false;
  std::optional<double> coverage;     // pool coverage, when a pool was built
  std::optional<double> probability;  // keep probability, when one applied
  std::size_t remaining = 0;          // quota left after this decision
  Point2 point{0.0, 0.0};
};

class Controller {
 public:
  explicit Controller(ControllerConfig cfg)
      : cfg_(std::move(cfg)),
        rng_(cfg_.seed),
        scaler_(cfg_.log_base),
        clusterer_(cfg_.clustering) {
    cfg_.validate();
    window_ = WindowState::start(cfg_.budget, cfg_.window);
  }

  Decision process(const MassSummary& summary) {
    ++window_.position;
    if (window_.position > window_.window) adjust_parameters(window_);

    const auto scaled = scaler_.scale(summary);
    if (scaled.bounds_changed) clusterer_.rescale(scaled.previous, scaler_.bounds());

    cycles_.record_period(1);
    const auto loc = clusterer_.locate(scaled.point, cycles_.decay_step());

    Decision d;
    d.cluster_id = loc.cluster_id;
    d.is_new = loc.is_new;
    d.point = scaled.point;
    if (window_.remaining > 0) {
      if (loc.is_new) {
        d.kept = true;
        d.probability = 1.0;
      } else {
        const double s =
            eagerness(window_.relative_position(), window_.utilization());
        const auto pool =
            build_selection_pool(clusterer_.clusters(), cfg_.budget, s,
                                 cfg_.pool_threshold(), cfg_.alpha, rng_, cfg_.pool_fill);
        d.coverage = pool.coverage;
        if (pool.contains(loc.cluster_id)) {
          const auto* c = clusterer_.find(loc.cluster_id);
          const double ps = sampling_probability(static_cast<double>(c->count),
                                                 pool.size_mean, pool.size_stddev,
                                                 cfg_.budget, pool.coverage);
          d.probability = ps;
          d.kept = bernoulli(rng_, ps);
        }
      }
    }
    if (d.kept) --window_.remaining;
    d.remaining = window_.remaining;
    return d;
  }

  const ControllerConfig& config() const { return cfg_; }
  const WindowState& window() const { return window_; }
  const MassClusterer& clusterer() const { return clusterer_; }
  const ScoreScaler& scaler() const { return scaler_; }

 private:
  ControllerConfig cfg_;
  Rng rng_;
  ScoreScaler scaler_;
  MassClusterer clusterer_;
  WorkCycleTracker cycles_;
  WindowState window_;
};

}  // namespace masstrace
