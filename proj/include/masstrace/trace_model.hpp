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

// Traces as bags of categorical span terms.
//
// Spans are grouped by trace id into TraceDocuments. Each span contributes
// one term per categorical field, prefixed with the field name so that equal
// values in different fields stay distinct ("url:/a" vs "service:/a"). A
// document is then counted against a Vocabulary into a sparse CountVector and
// squashed into (0, 1] by f(c) = 1 / (1 + g(c)), which keeps frequent terms
// from crowding the rest of the [0, 1] workspace near one end.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace masstrace {

struct SpanRecord {
  std::string trace_id;
  std::string service_name;
  std::string url;
  std::string process_id;
  std::string node_id;
  std::int64_t timestamp_micros = 0;

  friend bool operator==(const SpanRecord&, const SpanRecord&) = default;
};

// Terms contributed by a single span. Timestamps are never featurized.
inline std::array<std::string, 4> span_terms(const SpanRecord& span) {
  return {"service:" + span.service_name, "url:" + span.url,
          "process:" + span.process_id, "node:" + span.node_id};
}

struct TraceDocument {
  std::string trace_id;
  std::vector<std::string> terms;
  std::vector<SpanRecord> spans;

  void add_span(SpanRecord span) {
    for (auto& term : span_terms(span)) terms.push_back(std::move(term));
    spans.push_back(std::move(span));
  }
};

// Groups an ordered span stream into traces. A trace is complete once
// `flush_gap` further spans have arrived without any of them carrying its id.
class TraceAssembler {
 public:
  static constexpr std::size_t kDefaultFlushGap = 1000;

  explicit TraceAssembler(std::size_t flush_gap = kDefaultFlushGap)
      : flush_gap_(flush_gap) {
    if (flush_gap_ == 0) throw std::invalid_argument("flush_gap must be >= 1");
  }

  // Feeds one span; returns the traces that became complete, oldest first.
  std::vector<TraceDocument> push(SpanRecord span) {
    std::vector<TraceDocument> out;
    if (span.trace_id.empty()) {
      ++rejected_;
      return out;
    }
    const std::uint64_t index = next_index_++;
    auto it = pending_.find(span.trace_id);
    if (it == pending_.end()) {
      it = pending_.emplace(span.trace_id, Pending{}).first;
      it->second.doc.trace_id = span.trace_id;
    } else {
      by_recency_.erase(it->second.last_seen);
    }
    it->second.last_seen = index;
    by_recency_.emplace(index, it->first);
    it->second.doc.add_span(std::move(span));

    while (!by_recency_.empty() &&
           index - by_recency_.begin()->first >= flush_gap_) {
      out.push_back(take(by_recency_.begin()));
    }
    return out;
  }

  // Emits every pending trace, least recently seen first.
  std::vector<TraceDocument> flush() {
    std::vector<TraceDocument> out;
    out.reserve(by_recency_.size());
    while (!by_recency_.empty()) out.push_back(take(by_recency_.begin()));
    return out;
  }

  std::size_t pending() const { return pending_.size(); }
  // Spans dropped for having an empty trace id.
  std::size_t rejected() const { return rejected_; }

 private:
  struct Pending {
    TraceDocument doc;
    std::uint64_t last_seen = 0;
  };

  TraceDocument take(std::map<std::uint64_t, std::string>::iterator it) {
    auto node = pending_.extract(it->second);
    by_recency_.erase(it);
    return std::move(node.mapped().doc);
  }

  std::size_t flush_gap_;
  std::uint64_t next_index_ = 0;
  std::size_t rejected_ = 0;
  std::unordered_map<std::string, Pending> pending_;
  std::map<std::uint64_t, std::string> by_recency_;
};

// Append-only term -> dimension map.
//
// Once frozen, the feature space seen by the forest stops growing: terms with
// an index at or beyond the frozen size all land in one overflow dimension.
class Vocabulary {
 public:
  std::uint32_t index_of(std::string_view term) {
    auto it = index_.find(std::string(term));
    if (it != index_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(terms_.size());
    terms_.emplace_back(term);
    index_.emplace(terms_.back(), id);
    return id;
  }

  // Lookup without insertion.
  std::optional<std::uint32_t> find(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return terms_.size(); }
  const std::string& term(std::uint32_t index) const { return terms_.at(index); }

  void freeze() { frozen_dims_ = terms_.size(); }
  bool frozen() const { return frozen_dims_.has_value(); }
  std::size_t frozen_dims() const { return frozen_dims_.value_or(terms_.size()); }

  // Dimensionality of the feature space: the frozen terms plus one overflow
  // slot, or every term seen so far before freezing.
  std::size_t feature_dims() const {
    return frozen_dims_ ? *frozen_dims_ + 1 : terms_.size();
  }

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::optional<std::size_t> frozen_dims_;
};

// Sparse term counts sorted by dimension index.
struct CountVector {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;

  std::uint32_t at(std::uint32_t index) const {
    auto it = std::lower_bound(
        entries.begin(), entries.end(), index,
        [](const auto& e, std::uint32_t i) { return e.first < i; });
    return it != entries.end() && it->first == index ? it->second : 0;
  }

  friend bool operator==(const CountVector&, const CountVector&) = default;
};

inline CountVector vectorize(const TraceDocument& doc, Vocabulary& vocab) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& term : doc.terms) ++counts[vocab.index_of(term)];
  CountVector x;
  x.entries.assign(counts.begin(), counts.end());
  return x;
}

// Folds every dimension >= `fixed_dims` into dimension `fixed_dims`.
inline CountVector fold_overflow(const CountVector& x, std::size_t fixed_dims) {
  CountVector out;
  std::uint32_t overflow = 0;
  for (const auto& [index, count] : x.entries) {
    if (index < fixed_dims) {
      out.entries.emplace_back(index, count);
    } else {
      overflow += count;
    }
  }
  if (overflow > 0)
    out.entries.emplace_back(static_cast<std::uint32_t>(fixed_dims), overflow);
  return out;
}

enum class CountTransform { kIdentity, kLog1p };

// f(c) = 1 / (1 + g(c)).
inline double squash_count(double count, CountTransform g = CountTransform::kIdentity) {
  const double gc = g == CountTransform::kIdentity ? count : std::log1p(count);
  return 1.0 / (1.0 + gc);
}

using ScaledVector = std::vector<double>;

// Dense transformed vector of length `dims`; absent terms map to 1.0.
inline ScaledVector transform(const CountVector& x, std::size_t dims,
                              CountTransform g = CountTransform::kIdentity) {
  ScaledVector v(dims, 1.0);
  for (const auto& [index, count] : x.entries) {
    if (index >= dims)
      throw std::out_of_range("count vector index exceeds feature dimensions");
    v[index] = squash_count(count, g);
  }
  return v;
}

}  // namespace masstrace
