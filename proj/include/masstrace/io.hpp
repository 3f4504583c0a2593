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

// File formats.
//
//   spans       JSONL, one span per line: traceId, serviceName, url,
//               processId, nodeId, timestampMicros. Other keys are ignored.
//   labels      CSV with header traceId,template_id,is_anomaly (0/1).
//   decisions   JSONL per trace: traceId, kept, cluster, is_new, theta_hat,
//               p_s, s_r. theta_hat / p_s are null when no pool was consulted.
//   clusters    CSV with header seq,cluster_id,centroid_m,centroid_p,count,energy.
//   report      CSV (budget,J,P,R,F1) or JSON {"rows": [...]} with the same keys.
//   forest      JSON snapshot {"format": "masstrace-forest", "version": 1, ...}
//               holding the config, observed count and per-tree node arrays
//               [split, mass, left, right, level]. Not a stable wire format.

#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "masstrace/controller.hpp"
#include "masstrace/evaluation.hpp"
#include "masstrace/hst_forest.hpp"
#include "masstrace/synth_stream.hpp"
#include "masstrace/trace_model.hpp"

namespace masstrace::io {

using nlohmann::json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Returns nullopt for lines that are not a JSON object with a string traceId.
// An empty traceId parses; the assembler rejects it.
inline std::optional<SpanRecord> parse_span(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  auto it = j.find("traceId");
  if (it == j.end() || !it->is_string()) return std::nullopt;
  SpanRecord s;
  s.trace_id = it->get<std::string>();
  auto str = [&](const char* key, std::string& dst) {
    auto f = j.find(key);
    if (f == j.end()) return true;
    if (!f->is_string()) return false;
    dst = f->get<std::string>();
    return true;
  };
  if (!str("serviceName", s.service_name) || !str("url", s.url) ||
      !str("processId", s.process_id) || !str("nodeId", s.node_id))
    return std::nullopt;
  if (auto ts = j.find("timestampMicros"); ts != j.end()) {
    if (!ts->is_number_integer()) return std::nullopt;
    s.timestamp_micros = ts->get<std::int64_t>();
  }
  return s;
}

inline std::string span_line(const SpanRecord& s) {
  json j;
  j["traceId"] = s.trace_id;
  j["serviceName"] = s.service_name;
  j["url"] = s.url;
  j["processId"] = s.process_id;
  j["nodeId"] = s.node_id;
  j["timestampMicros"] = s.timestamp_micros;
  return j.dump();
}

inline void write_labels(std::ostream& out, const std::vector<TraceLabel>& labels) {
  out << "traceId,template_id,is_anomaly\n";
  for (const auto& l : labels)
    out << l.trace_id << ',' << l.template_id << ',' << (l.anomaly ? 1 : 0) << '\n';
}

inline std::vector<TraceLabel> read_labels(std::istream& in) {
  std::vector<TraceLabel> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("traceId,", 0) == 0) continue;
    const auto a = line.find(',');
    const auto b = a == std::string::npos ? a : line.find(',', a + 1);
    if (b == std::string::npos)
      throw FormatError("labels line " + std::to_string(lineno) + ": expected 3 fields");
    TraceLabel l;
    l.trace_id = line.substr(0, a);
    l.template_id = line.substr(a + 1, b - a - 1);
    const auto flag = line.substr(b + 1);
    if (flag != "0" && flag != "1")
      throw FormatError("labels line " + std::to_string(lineno) + ": is_anomaly must be 0 or 1");
    l.anomaly = flag == "1";
    labels.push_back(std::move(l));
  }
  return labels;
}

inline std::string decision_line(const std::string& trace_id, const Decision& d) {
  json j;
  j["traceId"] = trace_id;
  j["kept"] = d.kept;
  j["cluster"] = d.cluster_id;
  j["is_new"] = d.is_new;
  j["theta_hat"] = d.coverage ? json(*d.coverage) : json(nullptr);
  j["p_s"] = d.probability ? json(*d.probability) : json(nullptr);
  j["s_r"] = d.remaining;
  return j.dump();
}

struct DecisionRecord {
  std::string trace_id;
  bool kept = false;
};

inline std::vector<DecisionRecord> read_decisions(std::istream& in) {
  std::vector<DecisionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("traceId") ||
        !j["traceId"].is_string() || !j.contains("kept") || !j["kept"].is_boolean())
      throw FormatError("decision log line " + std::to_string(lineno) + " is malformed");
    out.push_back({j["traceId"].get<std::string>(), j["kept"].get<bool>()});
  }
  return out;
}

inline void write_cluster_header(std::ostream& out) {
  out << "seq,cluster_id,centroid_m,centroid_p,count,energy\n";
}

inline void write_cluster_rows(std::ostream& out, std::uint64_t seq,
                               const std::vector<Cluster>& clusters) {
  for (const auto& c : clusters) {
    out << seq << ',' << c.id << ',' << json(c.centroid[0]).dump() << ','
        << json(c.centroid[1]).dump() << ',' << c.count << ',' << json(c.energy).dump()
        << '\n';
  }
}

inline void write_report_csv(std::ostream& out, const std::vector<EvaluationRow>& rows) {
  out << "budget,J,P,R,F1\n";
  for (const auto& r : rows)
    out << json(r.budget).dump() << ',' << json(r.jain).dump() << ','
        << json(r.precision).dump() << ',' << json(r.recall).dump() << ','
        << json(r.f1).dump() << '\n';
}

inline json report_json(const std::vector<EvaluationRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"budget", r.budget}, {"J", r.jain}, {"P", r.precision},
                   {"R", r.recall}, {"F1", r.f1}});
  return {{"rows", arr}};
}

inline json forest_snapshot(const HalfSpaceForest& forest) {
  const auto& cfg = forest.config();
  json trees = json::array();
  for (const auto& t : forest.trees()) {
    json nodes = json::array();
    for (const auto& n : t.nodes())
      nodes.push_back(json::array({n.split, n.mass, n.left, n.right, n.level}));
    trees.push_back({{"workspace_low", t.workspace_low()},
                     {"workspace_high", t.workspace_high()},
                     {"split_dims", t.split_dims()},
                     {"nodes", std::move(nodes)}});
  }
  return {{"format", "masstrace-forest"},
          {"version", 1},
          {"config",
           {{"trees", cfg.trees},
            {"depth", cfg.depth},
            {"size_limit", cfg.size_limit},
            {"seed", cfg.seed},
            {"dims", cfg.dims}}},
          {"observed", forest.observed()},
          {"trees", std::move(trees)}};
}

inline HalfSpaceForest restore_forest(const json& snap) {
  try {
    if (snap.at("format") != "masstrace-forest" || snap.at("version") != 1)
      throw FormatError("unsupported forest snapshot");
    const auto& c = snap.at("config");
    ForestConfig cfg;
    cfg.trees = c.at("trees").get<std::size_t>();
    cfg.depth = c.at("depth").get<std::size_t>();
    cfg.size_limit = c.at("size_limit").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.dims = c.at("dims").get<std::size_t>();
    std::vector<HalfSpaceTree> trees;
    for (const auto& t : snap.at("trees")) {
      std::vector<HalfSpaceTree::Node> nodes;
      for (const auto& n : t.at("nodes")) {
        HalfSpaceTree::Node node;
        node.split = n.at(0).get<double>();
        node.mass = n.at(1).get<std::uint64_t>();
        node.left = n.at(2).get<std::int32_t>();
        node.right = n.at(3).get<std::int32_t>();
        node.level = n.at(4).get<std::uint32_t>();
        nodes.push_back(node);
      }
      trees.push_back(HalfSpaceTree::restore(
          cfg.depth, t.at("workspace_low").get<std::vector<double>>(),
          t.at("workspace_high").get<std::vector<double>>(),
          t.at("split_dims").get<std::vector<std::uint32_t>>(), std::move(nodes)));
    }
    return HalfSpaceForest::restore(cfg, snap.at("observed").get<std::uint64_t>(),
                                    std::move(trees));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed forest snapshot: ") + e.what());
  }
}

}  // namespace masstrace::io
