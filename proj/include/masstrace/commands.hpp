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

// File-level commands behind the masstrace CLI. Each returns a process exit
// code: 0 success, 1 usage error, 2 data error.

#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "masstrace/evaluation.hpp"
#include "masstrace/io.hpp"
#include "masstrace/pipeline.hpp"
#include "masstrace/synth_stream.hpp"
#include "masstrace/trace_model.hpp"

namespace masstrace::cmd {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2 };

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read " + p.string());
  return in;
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

// Streams span lines from `in` into complete traces. Malformed lines are
// skipped and counted.
class SpanReader {
 public:
  SpanReader(std::istream& in, std::size_t flush_gap) : in_(in), assembler_(flush_gap) {}

  template <class Fn>
  void for_each_trace(Fn&& fn) {
    std::string line;
    while (std::getline(in_, line)) {
      if (line.empty()) continue;
      auto span = io::parse_span(line);
      if (!span) {
        ++malformed_;
        continue;
      }
      for (auto& doc : assembler_.push(std::move(*span))) fn(std::move(doc));
    }
    for (auto& doc : assembler_.flush()) fn(std::move(doc));
  }

  std::size_t malformed() const { return malformed_; }
  std::size_t rejected() const { return assembler_.rejected(); }

 private:
  std::istream& in_;
  TraceAssembler assembler_;
  std::size_t malformed_ = 0;
};

inline void report_skips(const SpanReader& r, std::ostream& log) {
  if (r.malformed() > 0) log << "warning: skipped " << r.malformed() << " malformed span line(s)\n";
  if (r.rejected() > 0) log << "warning: rejected " << r.rejected() << " span(s) with empty traceId\n";
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
  GeneratorConfig generator;
  fs::path spans_out;
  fs::path labels_out;
};

inline int generate(const GenerateOptions& opt, std::ostream& log = std::cerr) {
  try {
    const auto stream = masstrace::generate(opt.generator);
    auto spans = open_out(opt.spans_out);
    for (const auto& s : stream.spans) spans << io::span_line(s) << '\n';
    auto labels = open_out(opt.labels_out);
    io::write_labels(labels, stream.labels);
    return kOk;
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  }
}

// ---------------------------------------------------------------------------

struct LabelOptions {
  fs::path input;
  fs::path labels_out;
  double eps = 2.5;
  std::size_t minpts = 5;
  double anomaly_quota = 0.05;
  std::size_t flush_gap = TraceAssembler::kDefaultFlushGap;
};

// Labels an unlabeled span stream by DBSCAN over raw count vectors; the
// smallest groups, up to the quota, are marked anomalous.
inline int label(const LabelOptions& opt, std::ostream& log = std::cerr) {
  try {
    auto in = open_in(opt.input);
    SpanReader reader(in, opt.flush_gap);
    Vocabulary vocab;
    std::vector<std::string> ids;
    std::vector<CountVector> points;
    reader.for_each_trace([&](TraceDocument doc) {
      points.push_back(vectorize(doc, vocab));
      ids.push_back(std::move(doc.trace_id));
    });
    report_skips(reader, log);
    const auto groups = dbscan<CountVector>(points, opt.eps, opt.minpts);
    const auto anomalous = flag_smallest_groups(groups, opt.anomaly_quota);
    std::vector<TraceLabel> labels;
    labels.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      labels.push_back({ids[i], "group-" + std::to_string(groups[i]), anomalous[i]});
    auto out = open_out(opt.labels_out);
    io::write_labels(out, labels);
    return kOk;
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  }
}

// ---------------------------------------------------------------------------

struct SampleOptions {
  PipelineConfig pipeline;
  fs::path input;
  fs::path out_dir;
  std::size_t flush_gap = TraceAssembler::kDefaultFlushGap;
  std::size_t snapshots = 20;                // used when snapshot_every is unset
  std::optional<std::size_t> snapshot_every;  // traces between cluster snapshots
  bool write_forest = false;
};

inline nlohmann::json run_manifest(const SampleOptions& opt, std::size_t traces,
                                   std::size_t kept) {
  const auto& c = opt.pipeline.controller;
  const auto& f = opt.pipeline.forest;
  return {{"sampler", "mass"},
          {"budget", c.budget},
          {"window", c.window},
          {"theta", c.pool_threshold()},
          {"alpha", c.alpha},
          {"pool_fill", c.pool_fill == PoolFill::kWithin ? "within" : "reach"},
          {"bandwidth", {c.clustering.bandwidth.h[0], c.clustering.bandwidth.h[1]}},
          {"kernel_fraction", c.clustering.kernel_fraction},
          {"trees", f.trees},
          {"depth", f.depth},
          {"size_limit", f.size_limit},
          {"warmup", opt.pipeline.warmup},
          {"seed", c.seed},
          {"traces", traces},
          {"kept", kept}};
}

// Number of distinct trace ids in a span file; used to space snapshots.
inline std::size_t count_traces(const fs::path& input) {
  auto in = open_in(input);
  std::unordered_set<std::string> ids;
  std::string line;
  while (std::getline(in, line))
    if (auto s = io::parse_span(line); s && !s->trace_id.empty()) ids.insert(s->trace_id);
  return ids.size();
}

inline int sample(const SampleOptions& opt, std::ostream& log = std::cerr) {
  try {
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) throw DataError("cannot create " + opt.out_dir.string() + ": " + ec.message());

    std::size_t every = 0;
    if (opt.snapshot_every) {
      every = *opt.snapshot_every;
    } else if (opt.snapshots > 0) {
      const std::size_t total = count_traces(opt.input);
      every = std::max<std::size_t>(1, (total + opt.snapshots - 1) / opt.snapshots);
    }

    auto in = open_in(opt.input);
    auto decisions = open_out(opt.out_dir / "decisions.jsonl");
    auto kept_spans = open_out(opt.out_dir / "kept_spans.jsonl");
    auto clusters = open_out(opt.out_dir / "clusters.csv");
    io::write_cluster_header(clusters);

    SamplingPipeline pipeline(opt.pipeline);
    SpanReader reader(in, opt.flush_gap);
    std::size_t traces = 0, kept = 0;
    auto emit = [&](std::vector<TraceDecision> batch) {
      for (auto& td : batch) {
        ++traces;
        decisions << io::decision_line(td.doc.trace_id, td.decision) << '\n';
        if (td.decision.kept) {
          ++kept;
          for (const auto& s : td.doc.spans) kept_spans << io::span_line(s) << '\n';
        }
        if (every > 0 && traces % every == 0)
          io::write_cluster_rows(clusters, traces, pipeline.controller().clusterer().clusters());
      }
    };
    reader.for_each_trace([&](TraceDocument doc) { emit(pipeline.offer(std::move(doc))); });
    emit(pipeline.finish());
    report_skips(reader, log);

    auto manifest = open_out(opt.out_dir / "run.json");
    manifest << run_manifest(opt, traces, kept).dump(2) << '\n';
    if (opt.write_forest && pipeline.warmed_up()) {
      auto forest = open_out(opt.out_dir / "forest.json");
      forest << io::forest_snapshot(pipeline.forest()).dump() << '\n';
    }
    if (!decisions || !kept_spans || !clusters || !manifest)
      throw DataError("write failed under " + opt.out_dir.string());
    return kOk;
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  }
}

// ---------------------------------------------------------------------------

struct UniformOptions {
  fs::path input;
  fs::path out_dir;
  double budget = 0.05;
  std::uint64_t seed = 42;
  std::size_t flush_gap = TraceAssembler::kDefaultFlushGap;
};

// Baseline: keeps each trace independently with probability `budget`.
// Writes a decision log in the same schema as `sample`.
inline int uniform(const UniformOptions& opt, std::ostream& log = std::cerr) {
  try {
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) throw DataError("cannot create " + opt.out_dir.string() + ": " + ec.message());
    auto in = open_in(opt.input);
    auto decisions = open_out(opt.out_dir / "decisions.jsonl");
    SpanReader reader(in, opt.flush_gap);
    Rng rng(opt.seed);
    std::size_t traces = 0, kept = 0;
    reader.for_each_trace([&](TraceDocument doc) {
      Decision d;
      d.kept = bernoulli(rng, opt.budget);
      d.probability = opt.budget;
      ++traces;
      kept += d.kept;
      decisions << io::decision_line(doc.trace_id, d) << '\n';
    });
    report_skips(reader, log);
    auto manifest = open_out(opt.out_dir / "run.json");
    manifest << nlohmann::json{{"sampler", "uniform"},
                               {"budget", opt.budget},
                               {"seed", opt.seed},
                               {"traces", traces},
                               {"kept", kept}}
                    .dump(2)
             << '\n';
    return kOk;
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  }
}

// ---------------------------------------------------------------------------

struct EvaluateOptions {
  fs::path labels;
  std::vector<fs::path> decisions;
  // One per decision log; when empty, each log's budget is read from the
  // run.json written beside it.
  std::vector<double> budgets;
  std::optional<fs::path> csv_out;
  std::optional<fs::path> json_out;
};

inline double manifest_budget(const fs::path& decisions) {
  const auto path = decisions.parent_path() / "run.json";
  auto in = open_in(path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("budget") || !j["budget"].is_number())
    throw DataError("no budget in " + path.string());
  return j["budget"].get<double>();
}

// Scores decision logs against labels. Metrics are taken over the traces in
// each log; every logged id must have a label.
inline std::vector<EvaluationRow> evaluate_logs(const EvaluateOptions& opt) {
  if (!opt.budgets.empty() && opt.budgets.size() != opt.decisions.size())
    throw DataError("give one --budget per --decisions file, or none");
  auto lin = open_in(opt.labels);
  std::vector<TraceLabel> labels;
  try {
    labels = io::read_labels(lin);
  } catch (const io::FormatError& e) {
    throw DataError(e.what());
  }
  std::unordered_map<std::string, std::size_t> by_id;
  std::unordered_map<std::string, std::size_t> group_ids;
  std::vector<std::size_t> group_of;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_id.emplace(labels[i].trace_id, i);
    group_of.push_back(group_ids.try_emplace(labels[i].template_id, group_ids.size())
                           .first->second);
  }

  std::vector<EvaluationRow> rows;
  for (std::size_t k = 0; k < opt.decisions.size(); ++k) {
    const double budget = opt.budgets.empty() ? manifest_budget(opt.decisions[k]) : opt.budgets[k];
    auto din = open_in(opt.decisions[k]);
    std::vector<io::DecisionRecord> log;
    try {
      log = io::read_decisions(din);
    } catch (const io::FormatError& e) {
      throw DataError(e.what());
    }
    std::vector<bool> kept, anomalous;
    std::vector<std::size_t> groups;
    // Compact group ids to those present in this log.
    std::unordered_map<std::size_t, std::size_t> local;
    for (const auto& rec : log) {
      auto it = by_id.find(rec.trace_id);
      if (it == by_id.end())
        throw DataError("trace " + rec.trace_id + " in " + opt.decisions[k].string() +
                        " has no label");
      kept.push_back(rec.kept);
      anomalous.push_back(labels[it->second].anomaly);
      groups.push_back(local.try_emplace(group_of[it->second], local.size()).first->second);
    }
    rows.push_back(evaluate_run(budget, kept, groups, anomalous));
  }
  return rows;
}

inline int evaluate(const EvaluateOptions& opt, std::ostream& out = std::cout,
                    std::ostream& log = std::cerr) {
  try {
    const auto rows = evaluate_logs(opt);
    if (opt.csv_out) {
      auto f = open_out(*opt.csv_out);
      io::write_report_csv(f, rows);
    }
    if (opt.json_out) {
      auto f = open_out(*opt.json_out);
      f << io::report_json(rows).dump(2) << '\n';
    }
    io::write_report_csv(out, rows);
    return kOk;
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  }
}

// ---------------------------------------------------------------------------

struct RunOptions {
  GeneratorConfig generator;
  SampleOptions sample;  // input/out_dir are set per budget
  std::vector<double> budgets{0.005, 0.01, 0.02, 0.05, 0.10};
  fs::path out_dir;
};

// Generate -> sample and uniform baseline at every budget -> reports.
inline int run(const RunOptions& opt, std::ostream& out = std::cout,
               std::ostream& log = std::cerr) {
  try {
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) throw DataError("cannot create " + opt.out_dir.string() + ": " + ec.message());
    GenerateOptions g{opt.generator, opt.out_dir / "spans.jsonl", opt.out_dir / "labels.csv"};
    if (int rc = generate(g, log); rc != kOk) return rc;

    EvaluateOptions mass_eval{g.labels_out, {}, {}, opt.out_dir / "report_mass.csv",
                              opt.out_dir / "report_mass.json"};
    EvaluateOptions uniform_eval{g.labels_out, {}, {}, opt.out_dir / "report_uniform.csv",
                                 opt.out_dir / "report_uniform.json"};
    for (double budget : opt.budgets) {
      char name[32];
      std::snprintf(name, sizeof name, "budget-%g", budget);
      SampleOptions s = opt.sample;
      s.pipeline.controller.budget = budget;
      s.input = g.spans_out;
      s.out_dir = opt.out_dir / name / "mass";
      if (int rc = sample(s, log); rc != kOk) return rc;
      mass_eval.decisions.push_back(s.out_dir / "decisions.jsonl");

      UniformOptions u{g.spans_out, opt.out_dir / name / "uniform", budget,
                       opt.sample.pipeline.controller.seed + 1, s.flush_gap};
      if (int rc = uniform(u, log); rc != kOk) return rc;
      uniform_eval.decisions.push_back(u.out_dir / "decisions.jsonl");
    }
    out << "# mass sampler\n";
    if (int rc = evaluate(mass_eval, out, log); rc != kOk) return rc;
    out << "# uniform baseline\n";
    return evaluate(uniform_eval, out, log);
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace masstrace::cmd
