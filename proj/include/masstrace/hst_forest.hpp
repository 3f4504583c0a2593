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

// Forest of half-space trees with a size limit on node expansion.
//
// Every tree partitions a randomly shifted workspace around [0, 1] by
// repeated midpoint splits. All nodes on one depth level share a split
// dimension, so a tree stores a single dimension per level. A node with fewer
// than `size_limit` training points is not expanded further. Each node keeps
// its mass: the number of points trained or streamed through it.
//
// A trace is scored by the terminal node it reaches in each tree. The
// augmented mass m * 2^l of that node is divided by the largest mass a tree
// can report, w * 2^depth, where w is the number of traces observed so far.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "masstrace/common.hpp"
#include "masstrace/trace_model.hpp"

namespace masstrace {

struct ForestConfig {
  std::size_t trees = 25;
  std::size_t depth = 15;
  std::size_t size_limit = 25;
  std::uint64_t seed = 42;
  std::size_t dims = 0;

  void validate() const {
    if (trees < 1) throw std::invalid_argument("forest needs at least one tree");
    if (depth < 1) throw std::invalid_argument("tree depth must be >= 1");
    if (size_limit < 1) throw std::invalid_argument("size_limit must be >= 1");
    if (dims == 0) throw std::invalid_argument("feature dimensionality must be >= 1");
  }
};

class HalfSpaceTree {
 public:
  static constexpr std::int32_t kNone = -1;

  struct Node {
    double split = 0.0;  // midpoint of the node's range on its level's dimension
    std::uint64_t mass = 0;
    std::int32_t left = kNone;  // values < split
    std::int32_t right = kNone;
    std::uint32_t level = 0;

    bool is_leaf() const { return left == kNone; }
  };

  HalfSpaceTree() = default;

  HalfSpaceTree(const ForestConfig& cfg, std::span<const ScaledVector> window,
                Rng& rng)
      : depth_(cfg.depth) {
    workspace_low_.resize(cfg.dims);
    workspace_high_.resize(cfg.dims);
    for (std::size_t q = 0; q < cfg.dims; ++q) {
      const double s = unit_double(rng);
      const double half = 2.0 * std::max(s, 1.0 - s);
      workspace_low_[q] = s - half;
      workspace_high_[q] = s + half;
    }
    split_dims_.resize(cfg.depth);
    for (auto& q : split_dims_)
      q = static_cast<std::uint32_t>(uniform_index(rng, cfg.dims));

    std::vector<std::uint32_t> members(window.size());
    std::iota(members.begin(), members.end(), 0u);
    std::vector<double> low = workspace_low_;
    std::vector<double> high = workspace_high_;
    grow(0, members, window, low, high, cfg.size_limit);
  }

  // Index of the terminal node reached by `v`.
  std::size_t leaf_for(std::span<const double> v) const {
    std::size_t at = 0;
    while (!nodes_[at].is_leaf()) {
      const Node& n = nodes_[at];
      at = static_cast<std::size_t>(v[split_dims_[n.level]] < n.split ? n.left
                                                                      : n.right);
    }
    return at;
  }

  // Increments the mass of every node on the path of `v`.
  void update(std::span<const double> v) {
    std::size_t at = 0;
    for (;;) {
      Node& n = nodes_[at];
      ++n.mass;
      if (n.is_leaf()) return;
      at = static_cast<std::size_t>(v[split_dims_[n.level]] < n.split ? n.left
                                                                      : n.right);
    }
  }

  std::size_t depth() const { return depth_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& split_dims() const { return split_dims_; }
  const std::vector<double>& workspace_low() const { return workspace_low_; }
  const std::vector<double>& workspace_high() const { return workspace_high_; }

  // Reassembles a tree from snapshot data. Structure is trusted.
  static HalfSpaceTree restore(std::size_t depth, std::vector<double> low,
                               std::vector<double> high,
                               std::vector<std::uint32_t> split_dims,
                               std::vector<Node> nodes) {
    HalfSpaceTree t;
    t.depth_ = depth;
    t.workspace_low_ = std::move(low);
    t.workspace_high_ = std::move(high);
    t.split_dims_ = std::move(split_dims);
    t.nodes_ = std::move(nodes);
    if (t.nodes_.empty() || t.split_dims_.size() != depth)
      throw std::invalid_argument("malformed tree snapshot");
    return t;
  }

  friend bool operator==(const HalfSpaceTree& a, const HalfSpaceTree& b) {
    return a.depth_ == b.depth_ && a.split_dims_ == b.split_dims_ &&
           a.workspace_low_ == b.workspace_low_ &&
           a.workspace_high_ == b.workspace_high_ &&
           std::equal(a.nodes_.begin(), a.nodes_.end(), b.nodes_.begin(),
                      b.nodes_.end(), [](const Node& x, const Node& y) {
                        return x.split == y.split && x.mass == y.mass &&
                               x.left == y.left && x.right == y.right &&
                               x.level == y.level;
                      });
  }

 private:
  std::int32_t grow(std::uint32_t level, std::vector<std::uint32_t>& members,
                    std::span<const ScaledVector> window, std::vector<double>& low,
                    std::vector<double>& high, std::size_t size_limit) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{});
    nodes_[id].mass = members.size();
    nodes_[id].level = level;
    if (level == depth_ || members.size() < size_limit) return id;

    const std::uint32_t q = split_dims_[level];
    const double mid = 0.5 * (low[q] + high[q]);
    nodes_[id].split = mid;

    std::vector<std::uint32_t> left_members;
    std::vector<std::uint32_t> right_members;
    for (auto i : members) (window[i][q] < mid ? left_members : right_members).push_back(i);
    members.clear();
    members.shrink_to_fit();

    const double saved_high = high[q];
    high[q] = mid;
    const auto left = grow(level + 1, left_members, window, low, high, size_limit);
    high[q] = saved_high;

    const double saved_low = low[q];
    low[q] = mid;
    const auto right = grow(level + 1, right_members, window, low, high, size_limit);
    low[q] = saved_low;

    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  std::size_t depth_ = 0;
  std::vector<double> workspace_low_;
  std::vector<double> workspace_high_;
  std::vector<std::uint32_t> split_dims_;
  std::vector<Node> nodes_;
};

// Per-tree scaled augmented mass, in tree order.
using MassProfile = std::vector<double>;

// Clustering coordinate of a trace: mean and 5th percentile of its profile.
struct MassSummary {
  double mean = 0.0;
  double low = 0.0;

  friend bool operator==(const MassSummary&, const MassSummary&) = default;
};

class HalfSpaceForest {
 public:
  HalfSpaceForest() = default;

  HalfSpaceForest(const ForestConfig& cfg, std::span<const ScaledVector> init_window)
      : cfg_(cfg) {
    cfg_.validate();
    if (init_window.empty())
      throw std::invalid_argument("forest needs a non-empty training window");
    for (const auto& v : init_window)
      if (v.size() != cfg_.dims)
        throw std::invalid_argument("training vector has wrong dimensionality");
    Rng master(cfg_.seed);
    trees_.reserve(cfg_.trees);
    for (std::size_t i = 0; i < cfg_.trees; ++i) {
      Rng tree_rng(master());
      trees_.emplace_back(cfg_, init_window, tree_rng);
    }
    observed_ = init_window.size();
  }

  // Scaled augmented mass per tree. Empty terminal nodes report the floor
  // 1 / (w * 2^depth) so that every score stays strictly positive.
  MassProfile score(std::span<const double> v) const {
    check_dims(v);
    MassProfile profile;
    profile.reserve(trees_.size());
    const double max_mass =
        std::ldexp(static_cast<double>(observed_), static_cast<int>(cfg_.depth));
    for (const auto& tree : trees_) {
      const auto& leaf = tree.nodes()[tree.leaf_for(v)];
      const double augmented =
          std::ldexp(static_cast<double>(leaf.mass), static_cast<int>(leaf.level));
      profile.push_back(std::min(1.0, std::max(1.0, augmented) / max_mass));
    }
    return profile;
  }

  void update(std::span<const double> v) {
    check_dims(v);
    for (auto& tree : trees_) tree.update(v);
    ++observed_;
  }

  const ForestConfig& config() const { return cfg_; }
  const std::vector<HalfSpaceTree>& trees() const { return trees_; }
  // Traces trained on or streamed through the forest.
  std::uint64_t observed() const { return observed_; }

  static HalfSpaceForest restore(ForestConfig cfg, std::uint64_t observed,
                                 std::vector<HalfSpaceTree> trees) {
    cfg.validate();
    if (trees.size() != cfg.trees)
      throw std::invalid_argument("tree count does not match configuration");
    HalfSpaceForest f;
    f.cfg_ = cfg;
    f.observed_ = observed;
    f.trees_ = std::move(trees);
    return f;
  }

  friend bool operator==(const HalfSpaceForest& a, const HalfSpaceForest& b) {
    return a.observed_ == b.observed_ && a.trees_ == b.trees_;
  }

 private:
  void check_dims(std::span<const double> v) const {
    if (v.size() != cfg_.dims)
      throw std::invalid_argument("vector dimensionality does not match forest");
  }

  ForestConfig cfg_;
  std::vector<HalfSpaceTree> trees_;
  std::uint64_t observed_ = 0;
};

// Arithmetic mean and nearest-rank 5th percentile (rank ceil(0.05 t)).
inline MassSummary summarize(std::span<const double> profile) {
  if (profile.empty()) throw std::invalid_argument("empty mass profile");
  std::vector<double> sorted(profile.begin(), profile.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t rank = std::max<std::size_t>(1, (5 * sorted.size() + 99) / 100);
  const double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  return {sum / static_cast<double>(sorted.size()), sorted[rank - 1]};
}

}  // namespace masstrace
