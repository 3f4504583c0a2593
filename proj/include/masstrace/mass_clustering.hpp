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

// Online clustering of mass summaries with hyper-rectangular neighborhoods.
//
// Points live in the unit square of log-scaled, min-max normalized
// (mean, low-percentile) mass scores. A point joins the nearest cluster whose
// box |centroid_i - x_i| <= h_i contains it, or founds a new cluster. Only
// points inside the inner kernel box r * h move the centroid, which tracks
// the running mean of those kernel samples. Idle clusters lose energy at a
// fixed step per arriving trace and die at zero. Two clusters merge when the
// centroid of one falls inside the box of the other.
//
// The additive kernel and a one-step mean-shift routine are also provided;
// with a cube-shaped support the mean-shift step lands exactly on the local
// sample mean, which is what justifies the running-mean centroid update.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "masstrace/common.hpp"
#include "masstrace/hst_forest.hpp"

namespace masstrace {

// Per-dimension half-widths of a cluster box, (mean, low percentile).
struct Bandwidth {
  Point2 h{0.1, 0.1};

  void validate() const {
    for (double v : h)
      if (!(v > 0.0 && v <= 1.0))
        throw std::invalid_argument("bandwidth components must lie in (0, 1]");
  }
};

inline bool within_box(const Point2& center, const Point2& pt, const Point2& half) {
  return std::abs(center[0] - pt[0]) <= half[0] &&
         std::abs(center[1] - pt[1]) <= half[1];
}

// ---------------------------------------------------------------------------
// Online score scaling

struct ScaleBounds {
  Point2 low{0.0, 0.0};
  Point2 high{0.0, 0.0};

  double normalize(std::size_t dim, double x) const {
    const double span = high[dim] - low[dim];
    if (span <= 0.0) return 0.5;
    return std::clamp((x - low[dim]) / span, 0.0, 1.0);
  }
  double denormalize(std::size_t dim, double y) const {
    return low[dim] + y * (high[dim] - low[dim]);
  }

  friend bool operator==(const ScaleBounds&, const ScaleBounds&) = default;
};

// Log-transforms mass scores and min-max normalizes them against the running
// extremes of everything seen so far.
class ScoreScaler {
 public:
  static constexpr double kDefaultLogBase = 10.0;

  struct Result {
    Point2 point;
    bool bounds_changed = false;
    ScaleBounds previous;
  };

  explicit ScoreScaler(double log_base = kDefaultLogBase) : log_base_(log_base) {
    if (!(log_base > 0.0) || log_base == 1.0)
      throw std::invalid_argument("log base must be positive and != 1");
  }

  Result scale(const MassSummary& raw) {
    if (!(raw.mean > 0.0) || !(raw.low > 0.0))
      throw std::domain_error("mass scores must be strictly positive");
    const double ln_base = std::log(log_base_);
    return scale_log({std::log(raw.mean) / ln_base, std::log(raw.low) / ln_base});
  }

  // Same as scale() for scores that are already log-transformed.
  Result scale_log(const Point2& log_scores) {
    Result r;
    r.previous = bounds_;
    if (!seen_) {
      bounds_.low = bounds_.high = log_scores;
      seen_ = true;
    } else {
      for (std::size_t d = 0; d < 2; ++d) {
        if (log_scores[d] < bounds_.low[d]) {
          bounds_.low[d] = log_scores[d];
          r.bounds_changed = true;
        }
        if (log_scores[d] > bounds_.high[d]) {
          bounds_.high[d] = log_scores[d];
          r.bounds_changed = true;
        }
      }
    }
    r.point = {bounds_.normalize(0, log_scores[0]), bounds_.normalize(1, log_scores[1])};
    return r;
  }

  const ScaleBounds& bounds() const { return bounds_; }
  bool seen() const { return seen_; }
  double log_base() const { return log_base_; }

 private:
  double log_base_;
  bool seen_ = false;
  ScaleBounds bounds_;
};

// ---------------------------------------------------------------------------
// Clusters

struct Cluster {
  std::uint64_t id = 0;
  Point2 centroid{0.0, 0.0};
  std::uint64_t count = 0;         // every trace ever associated
  std::uint64_t kernel_count = 0;  // traces that landed in the kernel box
  Point2 kernel_mean{0.0, 0.0};
  double energy = 1.0;
  std::uint64_t created_seq = 0;
};

// Maps a normalized point from `old_bounds` to `new_bounds`. Monotone in each
// dimension, so relative centroid order is preserved.
inline Point2 rescale_point(const Point2& p, const ScaleBounds& old_bounds,
                            const ScaleBounds& new_bounds) {
  Point2 out;
  for (std::size_t d = 0; d < 2; ++d)
    out[d] = new_bounds.normalize(d, old_bounds.denormalize(d, p[d]));
  return out;
}

inline void rescale_centers(std::vector<Cluster>& clusters,
                            const ScaleBounds& old_bounds,
                            const ScaleBounds& new_bounds) {
  if (old_bounds == new_bounds) return;
  for (auto& c : clusters) {
    c.centroid = rescale_point(c.centroid, old_bounds, new_bounds);
    c.kernel_mean = rescale_point(c.kernel_mean, old_bounds, new_bounds);
  }
}

// Index of the closest cluster whose box contains `pt`; ties go to the
// oldest cluster.
inline std::optional<std::size_t> nearest_qualifying(const std::vector<Cluster>& clusters,
                                                     const Point2& pt,
                                                     const Bandwidth& bw) {
  std::optional<std::size_t> best;
  double best_dist = 0.0;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const auto& c = clusters[i];
    if (!within_box(c.centroid, pt, bw.h)) continue;
    const double dist = distance(c.centroid, pt);
    if (!best || dist < best_dist ||
        (dist == best_dist && c.created_seq < clusters[*best].created_seq)) {
      best = i;
      best_dist = dist;
    }
  }
  return best;
}

// Moves the centroid to the running mean of kernel-box samples when `pt`
// lies inside r * h; otherwise leaves it alone. Returns whether `pt` counted.
inline bool update_centroid(Cluster& c, const Point2& pt, const Bandwidth& bw,
                            double kernel_fraction) {
  const Point2 kernel_half{kernel_fraction * bw.h[0], kernel_fraction * bw.h[1]};
  if (!within_box(c.centroid, pt, kernel_half)) return false;
  ++c.kernel_count;
  const double n = static_cast<double>(c.kernel_count);
  for (std::size_t d = 0; d < 2; ++d) {
    c.kernel_mean[d] += (pt[d] - c.kernel_mean[d]) / n;
    c.centroid[d] = c.kernel_mean[d];
  }
  return true;
}

struct MergeEvent {
  std::uint64_t absorbed;
  std::uint64_t survivor;
};

// Merges clusters whose centroid lies inside another cluster's box until no
// such pair remains. The older cluster survives and takes the count-weighted
// centroid. `clusters` must be ordered by created_seq and stays so.
inline std::vector<MergeEvent> merge_pass(std::vector<Cluster>& clusters,
                                          const Bandwidth& bw) {
  std::vector<MergeEvent> events;
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < clusters.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < clusters.size() && !merged; ++j) {
        Cluster& a = clusters[i];
        const Cluster& b = clusters[j];
        // Boxes share one bandwidth, so "a in b" and "b in a" coincide.
        if (!within_box(a.centroid, b.centroid, bw.h)) continue;
        const double total = static_cast<double>(a.count + b.count);
        const double kernel_total = static_cast<double>(a.kernel_count + b.kernel_count);
        for (std::size_t d = 0; d < 2; ++d) {
          a.centroid[d] = (a.centroid[d] * static_cast<double>(a.count) +
                           b.centroid[d] * static_cast<double>(b.count)) /
                          total;
          if (kernel_total > 0)
            a.kernel_mean[d] =
                (a.kernel_mean[d] * static_cast<double>(a.kernel_count) +
                 b.kernel_mean[d] * static_cast<double>(b.kernel_count)) /
                kernel_total;
        }
        a.count += b.count;
        a.kernel_count += b.kernel_count;
        a.energy = std::max(a.energy, b.energy);
        a.created_seq = std::min(a.created_seq, b.created_seq);
        events.push_back({b.id, a.id});
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
    }
  }
  return events;
}

struct ClusteringConfig {
  Bandwidth bandwidth;
  double kernel_fraction = 0.5;

  void validate() const {
    bandwidth.validate();
    if (!(kernel_fraction > 0.0 && kernel_fraction <= 1.0))
      throw std::invalid_argument("kernel fraction must lie in (0, 1]");
  }
};

struct Locality {
  std::uint64_t cluster_id = 0;
  bool is_new = false;
  // Centroid the point was tested against; equals the point for new clusters.
  Point2 centroid_at_assignment{0.0, 0.0};
};

class MassClusterer {
 public:
  // Energies at or below this are treated as exhausted; absorbs rounding
  // from repeated subtraction of 1/beta.
  static constexpr double kEnergyFloor = 1e-9;

  explicit MassClusterer(ClusteringConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  Locality locate(const Point2& pt, double decay_step) {
    if (!(pt[0] >= 0.0 && pt[0] <= 1.0 && pt[1] >= 0.0 && pt[1] <= 1.0))
      throw std::domain_error("point outside the unit square");
    const std::uint64_t seq = seq_++;
    Locality loc;
    if (auto idx = nearest_qualifying(clusters_, pt, cfg_.bandwidth)) {
      Cluster& c = clusters_[*idx];
      loc.cluster_id = c.id;
      loc.centroid_at_assignment = c.centroid;
      ++c.count;
      c.energy = 1.0;
      update_centroid(c, pt, cfg_.bandwidth, cfg_.kernel_fraction);
    } else {
      Cluster c;
      c.id = next_id_++;
      c.centroid = pt;
      c.kernel_mean = pt;
      c.count = 1;
      c.kernel_count = 1;
      c.energy = 1.0;
      c.created_seq = seq;
      clusters_.push_back(c);
      loc.cluster_id = c.id;
      loc.is_new = true;
      loc.centroid_at_assignment = pt;
    }

    for (auto& c : clusters_)
      if (c.id != loc.cluster_id) c.energy -= decay_step;
    std::erase_if(clusters_, [](const Cluster& c) { return c.energy <= kEnergyFloor; });

    for (const auto& e : merge_pass(clusters_, cfg_.bandwidth))
      if (e.absorbed == loc.cluster_id) loc.cluster_id = e.survivor;
    return loc;
  }

  void rescale(const ScaleBounds& old_bounds, const ScaleBounds& new_bounds) {
    rescale_centers(clusters_, old_bounds, new_bounds);
  }

  const Cluster* find(std::uint64_t id) const {
    for (const auto& c : clusters_)
      if (c.id == id) return &c;
    return nullptr;
  }

  const std::vector<Cluster>& clusters() const { return clusters_; }
  const ClusteringConfig& config() const { return cfg_; }
  std::uint64_t points_seen() const { return seq_; }

 private:
  ClusteringConfig cfg_;
  std::vector<Cluster> clusters_;
  std::uint64_t next_id_ = 0;
  std::uint64_t seq_ = 0;
};

// Tracks work cycles: maximal runs of consecutive periods that each received
// at least one trace. The mean number of traces per cycle is the cluster
// lifetime beta; idle clusters lose 1/beta energy per trace.
class WorkCycleTracker {
 public:
  void record_period(std::uint64_t traces) {
    if (traces == 0) {
      in_cycle_ = false;
      return;
    }
    if (!in_cycle_) {
      ++cycles_;
      in_cycle_ = true;
    }
    traces_ += traces;
  }

  // Mean traces per work cycle, at least 1.
  double beta() const {
    if (cycles_ == 0) return 1.0;
    return std::max(1.0, static_cast<double>(traces_) / static_cast<double>(cycles_));
  }
  double decay_step() const { return 1.0 / beta(); }

  std::uint64_t cycles() const { return cycles_; }
  std::uint64_t traces() const { return traces_; }

 private:
  std::uint64_t traces_ = 0;
  std::uint64_t cycles_ = 0;
  bool in_cycle_ = false;
};

// ---------------------------------------------------------------------------
// Kernel and mean-shift step

// 3 / (d 2^(d+1)) * sum_k (1 - u_k^2) inside the open unit cube, else 0.
inline double additive_kernel(std::span<const double> u) {
  const std::size_t d = u.size();
  if (d == 0) throw std::invalid_argument("kernel needs at least one dimension");
  double sum = 0.0;
  for (double uk : u) {
    if (!(std::abs(uk) < 1.0)) return 0.0;
    sum += 1.0 - uk * uk;
  }
  const double norm = 3.0 / (static_cast<double>(d) * std::ldexp(1.0, static_cast<int>(d) + 1));
  return norm * sum;
}

// One gradient-ascent step x + c * grad(p) / p of the density estimate built
// from the additive kernel with cube bandwidth h, where p is the uniform
// kernel estimate over the cube and c = d 2^d h^2 / 3. Throws if no sample
// lies strictly inside the cube around x.
inline std::vector<double> mean_shift_step(std::span<const std::vector<double>> samples,
                                           std::span<const double> x, double h) {
  const std::size_t d = x.size();
  if (d == 0) throw std::invalid_argument("point needs at least one dimension");
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth must be positive");

  const double n = static_cast<double>(samples.size());
  const double volume = std::pow(h, static_cast<double>(d));
  const double two_d = std::ldexp(1.0, static_cast<int>(d));
  const double dd = static_cast<double>(d);

  std::vector<double> gradient(d, 0.0);
  std::size_t inside = 0;
  for (const auto& s : samples) {
    if (s.size() != d) throw std::invalid_argument("sample dimensionality mismatch");
    bool in_cube = true;
    for (std::size_t k = 0; k < d && in_cube; ++k) in_cube = std::abs(x[k] - s[k]) < h;
    if (!in_cube) continue;
    ++inside;
    // d/dx_k of the kernel at (x - s) / h.
    for (std::size_t k = 0; k < d; ++k)
      gradient[k] += 3.0 / (dd * two_d * h * h) * (s[k] - x[k]);
  }
  if (inside == 0) throw std::domain_error("empty mean-shift neighborhood");

  const double density = static_cast<double>(inside) / (n * volume);
  const double step = dd * two_d * h * h / 3.0;
  std::vector<double> next(d);
  for (std::size_t k = 0; k < d; ++k)
    next[k] = x[k] + step * (gradient[k] / (n * volume)) / density;
  return next;
}

}  // namespace masstrace
