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

// Synthetic span streams with known anomaly structure.
//
// A handful of normal templates built from the head of each categorical
// value pool carry most of the traffic with skewed frequencies. Many small
// anomaly templates each pull values from the tail of the pools, so every
// anomaly shape is rare. Every template has a distinct term multiset.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "masstrace/common.hpp"
#include "masstrace/trace_model.hpp"

namespace masstrace {

struct GeneratorConfig {
  std::size_t n_traces = 10000;
  double anomaly_rate = 0.05;
  std::size_t n_normal_templates = 6;
  std::size_t n_anomaly_templates = 60;
  // Value pool sizes per field, and how many of each form the common head.
  std::size_t services = 17, common_services = 6;
  std::size_t urls = 40, common_urls = 2;
  std::size_t processes = 50, common_processes = 6;
  std::size_t nodes = 8, common_nodes = 2;
  std::size_t max_spans = 10;
  std::uint64_t seed = 7;

  void validate() const {
    if (!(anomaly_rate >= 0.0 && anomaly_rate < 1.0))
      throw std::invalid_argument("anomaly_rate must lie in [0, 1)");
    if (n_normal_templates == 0) throw std::invalid_argument("need a normal template");
    if (anomaly_rate > 0.0 && n_anomaly_templates == 0)
      throw std::invalid_argument("need an anomaly template when anomaly_rate > 0");
    if (max_spans == 0) throw std::invalid_argument("max_spans must be >= 1");
    auto check = [](std::size_t total, std::size_t head, const char* what) {
      if (head == 0 || head >= total)
        throw std::invalid_argument(std::string("pool split invalid for ") + what);
    };
    check(services, common_services, "services");
    check(urls, common_urls, "urls");
    check(processes, common_processes, "processes");
    check(nodes, common_nodes, "nodes");
  }
};

struct SpanShape {
  std::size_t service, url, process, node;
};

struct TraceTemplate {
  std::size_t id = 0;
  bool anomaly = false;
  std::vector<SpanShape> spans;
};

struct TraceLabel {
  std::string trace_id;
  std::string template_id;
  bool anomaly = false;
};

struct SyntheticStream {
  std::vector<SpanRecord> spans;
  std::vector<TraceLabel> labels;
  std::vector<TraceTemplate> templates;
};

namespace detail {

inline std::string pool_value(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%zu", prefix, i);
  return buf;
}

inline SpanRecord materialize(const SpanShape& s, const std::string& trace_id,
                              std::int64_t ts) {
  return {trace_id,
          pool_value("svc-", s.service),
          pool_value("/api/v1/r", s.url),
          pool_value("proc-", s.process),
          pool_value("node-", s.node),
          ts};
}

inline std::multiset<std::string> template_terms(const TraceTemplate& t) {
  std::multiset<std::string> terms;
  for (const auto& s : t.spans)
    for (auto& term : span_terms(materialize(s, "x", 0))) terms.insert(std::move(term));
  return terms;
}

}  // namespace detail

inline std::vector<TraceTemplate> make_templates(const GeneratorConfig& cfg, Rng& rng) {
  std::vector<TraceTemplate> out;
  std::set<std::multiset<std::string>> seen;
  auto head = [&](std::size_t common) { return uniform_index(rng, common); };
  auto tail = [&](std::size_t total, std::size_t common) {
    return common + uniform_index(rng, total - common);
  };
  auto span_count = [&] { return 1 + uniform_index(rng, cfg.max_spans); };

  auto add_unique = [&](auto&& build, bool anomaly) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      TraceTemplate t;
      t.id = out.size();
      t.anomaly = anomaly;
      build(t);
      if (seen.insert(detail::template_terms(t)).second) {
        out.push_back(std::move(t));
        return;
      }
    }
    throw std::runtime_error("could not draw enough distinct templates");
  };

  for (std::size_t i = 0; i < cfg.n_normal_templates; ++i) {
    add_unique(
        [&](TraceTemplate& t) {
          const std::size_t n = span_count();
          for (std::size_t s = 0; s < n; ++s)
            t.spans.push_back({head(cfg.common_services), head(cfg.common_urls),
                               head(cfg.common_processes), head(cfg.common_nodes)});
        },
        false);
  }
  for (std::size_t i = 0; i < cfg.n_anomaly_templates; ++i) {
    add_unique(
        [&](TraceTemplate& t) {
          const std::size_t n = span_count();
          for (std::size_t s = 0; s < n; ++s)
            t.spans.push_back({head(cfg.common_services), head(cfg.common_urls),
                               head(cfg.common_processes), head(cfg.common_nodes)});
          // One span hits a rare endpoint on a rare process; sometimes the
          // service or node is unusual too.
          auto& odd = t.spans[uniform_index(rng, n)];
          odd.url = tail(cfg.urls, cfg.common_urls);
          odd.process = tail(cfg.processes, cfg.common_processes);
          if (bernoulli(rng, 0.5)) odd.service = tail(cfg.services, cfg.common_services);
          if (bernoulli(rng, 0.25)) odd.node = tail(cfg.nodes, cfg.common_nodes);
        },
        true);
  }
  return out;
}

inline SyntheticStream generate(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SyntheticStream stream;
  stream.templates = make_templates(cfg, rng);

  // Normal templates follow a 1/rank popularity curve.
  std::vector<double> cumulative;
  double acc = 0.0;
  for (std::size_t i = 0; i < cfg.n_normal_templates; ++i) {
    acc += 1.0 / static_cast<double>(i + 1);
    cumulative.push_back(acc);
  }

  std::int64_t ts = 1'700'000'000'000'000;
  stream.labels.reserve(cfg.n_traces);
  for (std::size_t i = 0; i < cfg.n_traces; ++i) {
    const TraceTemplate* t;
    if (bernoulli(rng, cfg.anomaly_rate)) {
      t = &stream.templates[cfg.n_normal_templates +
                            uniform_index(rng, cfg.n_anomaly_templates)];
    } else {
      const double r = unit_double(rng) * acc;
      const auto pick = static_cast<std::size_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
      t = &stream.templates[std::min(pick, cfg.n_normal_templates - 1)];
    }
    char id[32];
    std::snprintf(id, sizeof id, "%016zx", i + 1);
    for (const auto& s : t->spans) stream.spans.push_back(detail::materialize(s, id, ts += 137));
    stream.labels.push_back(
        {id, detail::pool_value(t->anomaly ? "anomaly-" : "normal-", t->id), t->anomaly});
  }
  return stream;
}

}  // namespace masstrace
