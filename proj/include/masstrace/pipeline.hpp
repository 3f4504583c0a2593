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

// End-to-end sampler: traces -> count vectors -> forest mass summaries ->
// controller decisions.
//
// The first `warmup` traces are buffered. They fix the vocabulary (later
// terms share one overflow dimension) and train the forest, then receive
// their decisions in arrival order. Every later trace is scored first and
// then streamed into the forest.

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "masstrace/controller.hpp"
#include "masstrace/hst_forest.hpp"
#include "masstrace/trace_model.hpp"

namespace masstrace {

struct PipelineConfig {
  ForestConfig forest;  // `dims` is filled in from the warm-up vocabulary
  ControllerConfig controller;
  std::size_t warmup = 2000;
  CountTransform transform = CountTransform::kIdentity;

  void validate() const {
    if (warmup < 1) throw std::invalid_argument("warmup must be >= 1");
    ForestConfig f = forest;
    f.dims = 1;
    f.validate();
    controller.validate();
  }
};

struct TraceDecision {
  TraceDocument doc;
  MassSummary summary;
  Decision decision;
};

class SamplingPipeline {
 public:
  explicit SamplingPipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    controller_.emplace(cfg_.controller);
  }

  std::vector<TraceDecision> offer(TraceDocument doc) {
    std::vector<TraceDecision> out;
    if (!forest_) {
      auto counts = vectorize(doc, vocab_);
      warm_.push_back({std::move(doc), std::move(counts)});
      if (warm_.size() >= cfg_.warmup) out = drain_warmup();
      return out;
    }
    out.push_back(process(std::move(doc)));
    return out;
  }

  // Flushes a warm-up buffer that never filled up.
  std::vector<TraceDecision> finish() {
    if (!forest_ && !warm_.empty()) return drain_warmup();
    return {};
  }

  bool warmed_up() const { return forest_.has_value(); }
  const HalfSpaceForest& forest() const { return forest_.value(); }
  const Controller& controller() const { return *controller_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const PipelineConfig& config() const { return cfg_; }

 private:
  struct Buffered {
    TraceDocument doc;
    CountVector counts;
  };

  ScaledVector features(const CountVector& counts) const {
    return transform(fold_overflow(counts, vocab_.frozen_dims()), vocab_.feature_dims(),
                     cfg_.transform);
  }

  std::vector<TraceDecision> drain_warmup() {
    vocab_.freeze();
    std::vector<ScaledVector> window;
    window.reserve(warm_.size());
    for (const auto& b : warm_) window.push_back(features(b.counts));
    ForestConfig fc = cfg_.forest;
    fc.dims = vocab_.feature_dims();
    forest_.emplace(fc, window);

    std::vector<TraceDecision> out;
    out.reserve(warm_.size());
    for (std::size_t i = 0; i < warm_.size(); ++i) {
      // Warm-up traces already sit in the node masses; score only.
      const auto summary = summarize(forest_->score(window[i]));
      auto decision = controller_->process(summary);
      out.push_back({std::move(warm_[i].doc), summary, decision});
    }
    warm_.clear();
    warm_.shrink_to_fit();
    return out;
  }

  TraceDecision process(TraceDocument doc) {
    const auto v = features(vectorize(doc, vocab_));
    const auto summary = summarize(forest_->score(v));
    forest_->update(v);
    auto decision = controller_->process(summary);
    return {std::move(doc), summary, decision};
  }

  PipelineConfig cfg_;
  Vocabulary vocab_;
  std::vector<Buffered> warm_;
  std::optional<HalfSpaceForest> forest_;
  std::optional<Controller> controller_;
};

}  // namespace masstrace
