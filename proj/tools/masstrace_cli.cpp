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

#include <algorithm>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "masstrace/commands.hpp"

namespace {

using namespace masstrace;

struct SamplerFlags {
  std::vector<double> bandwidth{0.1, 0.1};
  std::optional<double> theta;
  std::string transform = "identity";
  std::string pool_fill = "within";
};

void add_sampler_flags(CLI::App* sub, cmd::SampleOptions& s, SamplerFlags& f,
                       bool with_budget) {
  auto& c = s.pipeline.controller;
  auto& forest = s.pipeline.forest;
  if (with_budget)
    sub->add_option("--budget", c.budget, "Fraction of traces to keep")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
  sub->add_option("--window", c.window, "Sampling window in traces")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_option("--bandwidth", f.bandwidth, "Cluster box half-widths m,p")
      ->delimiter(',')
      ->expected(2)
      ->capture_default_str();
  sub->add_option("--trees", forest.trees, "Number of trees")->capture_default_str();
  sub->add_option("--depth", forest.depth, "Maximum tree depth")->capture_default_str();
  sub->add_option("--size-limit", forest.size_limit, "Minimum node population to split")
      ->capture_default_str();
  sub->add_option("--theta", f.theta, "Selection pool threshold (default: budget)");
  sub->add_option("--alpha", c.alpha, "Pool sufficiency factor")->capture_default_str();
  sub->add_option("--pool-fill", f.pool_fill, "Pool threshold rule")
      ->check(CLI::IsMember({"within", "reach"}))
      ->capture_default_str();
  sub->add_option("--kernel-fraction", c.clustering.kernel_fraction,
                  "Kernel box as a fraction of the bandwidth")
      ->capture_default_str();
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--warmup", s.pipeline.warmup, "Traces used to train the forest")
      ->capture_default_str();
  sub->add_option("--transform", f.transform, "Count transform g")
      ->check(CLI::IsMember({"identity", "log1p"}))
      ->capture_default_str();
  sub->add_option("--flush-gap", s.flush_gap, "Spans after which a silent trace completes")
      ->capture_default_str();
  sub->add_option("--snapshots", s.snapshots, "Cluster snapshots per run")->capture_default_str();
  sub->add_option("--snapshot-every", s.snapshot_every, "Traces between cluster snapshots");
  sub->add_flag("--write-forest", s.write_forest, "Also write forest.json");
}

void apply_sampler_flags(cmd::SampleOptions& s, const SamplerFlags& f) {
  auto& c = s.pipeline.controller;
  c.clustering.bandwidth.h = {f.bandwidth.at(0), f.bandwidth.at(1)};
  c.theta = f.theta;
  c.pool_fill = f.pool_fill == "reach" ? PoolFill::kReach : PoolFill::kWithin;
  s.pipeline.forest.seed = c.seed;
  s.pipeline.transform =
      f.transform == "log1p" ? CountTransform::kLog1p : CountTransform::kIdentity;
}

void add_generator_flags(CLI::App* sub, GeneratorConfig& g) {
  sub->add_option("--traces", g.n_traces, "Number of traces")->capture_default_str();
  sub->add_option("--anomaly-rate", g.anomaly_rate, "Share of anomalous traces")
      ->capture_default_str();
  sub->add_option("--normal-templates", g.n_normal_templates)->capture_default_str();
  sub->add_option("--anomaly-templates", g.n_anomaly_templates)->capture_default_str();
  sub->add_option("--max-spans", g.max_spans)->capture_default_str();
  sub->add_option("--gen-seed", g.seed, "Generator seed")->capture_default_str();
}

// `--config` belongs to the top-level app (CLI11 reads config files there),
// but users write it after the subcommand too; hoist it to the front.
std::vector<std::string> hoist_config(int argc, char** argv) {
  std::vector<std::string> front, rest;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      front.push_back(arg);
      front.push_back(argv[++i]);
    } else if (arg.rfind("--config=", 0) == 0) {
      front.push_back(arg);
    } else {
      rest.push_back(arg);
    }
  }
  front.insert(front.end(), rest.begin(), rest.end());
  std::reverse(front.begin(), front.end());  // CLI11 consumes a reversed vector
  return front;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted tail-based trace sampling driven by half-space tree mass"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "TOML config; [sample] / [run] sections, flags take precedence");

  cmd::GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic span stream and its labels");
  add_generator_flags(g, gen.generator);
  g->add_option("--spans", gen.spans_out, "Span JSONL output")->required();
  g->add_option("--labels", gen.labels_out, "Labels CSV output")->required();

  cmd::LabelOptions lab;
  auto* l = app.add_subcommand("label", "Label traces with DBSCAN over count vectors");
  l->add_option("--input", lab.input, "Span JSONL input")->required();
  l->add_option("--out", lab.labels_out, "Labels CSV output")->required();
  l->add_option("--eps", lab.eps)->capture_default_str();
  l->add_option("--minpts", lab.minpts)->capture_default_str();
  l->add_option("--anomaly-quota", lab.anomaly_quota)->capture_default_str();
  l->add_option("--flush-gap", lab.flush_gap)->capture_default_str();

  cmd::SampleOptions smp;
  SamplerFlags smp_flags;
  auto* s = app.add_subcommand("sample", "Run the sampler over a span stream");
  s->add_option("--input", smp.input, "Span JSONL input")->required();
  s->add_option("--out-dir", smp.out_dir, "Output directory")->required();
  add_sampler_flags(s, smp, smp_flags, true);

  cmd::UniformOptions uni;
  auto* u = app.add_subcommand("uniform", "Uniform random baseline sampler");
  u->add_option("--input", uni.input, "Span JSONL input")->required();
  u->add_option("--out-dir", uni.out_dir, "Output directory")->required();
  u->add_option("--budget", uni.budget)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  u->add_option("--seed", uni.seed)->capture_default_str();
  u->add_option("--flush-gap", uni.flush_gap)->capture_default_str();

  cmd::EvaluateOptions ev;
  std::string ev_csv, ev_json;
  auto* e = app.add_subcommand("evaluate", "Score decision logs against labels");
  e->add_option("--labels", ev.labels, "Labels CSV")->required();
  e->add_option("--decisions", ev.decisions, "Decision log(s)")->required();
  e->add_option("--budget", ev.budgets, "Budget per decision log (default: run.json)");
  e->add_option("--csv", ev_csv, "Report CSV output");
  e->add_option("--json", ev_json, "Report JSON output");

  cmd::RunOptions run;
  SamplerFlags run_flags;
  auto* r = app.add_subcommand("run", "Generate, sample at several budgets, evaluate");
  r->add_option("--out-dir", run.out_dir, "Output directory")->required();
  r->add_option("--budgets", run.budgets, "Budgets to sweep")->delimiter(',')->capture_default_str();
  add_generator_flags(r, run.generator);
  add_sampler_flags(r, run.sample, run_flags, false);

  try {
    auto args = hoist_config(argc, argv);
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? cmd::kOk : cmd::kUsage;
  }

  try {
    if (*g) return cmd::generate(gen);
    if (*l) return cmd::label(lab);
    if (*s) {
      apply_sampler_flags(smp, smp_flags);
      return cmd::sample(smp);
    }
    if (*u) return cmd::uniform(uni);
    if (*e) {
      if (!ev_csv.empty()) ev.csv_out = ev_csv;
      if (!ev_json.empty()) ev.json_out = ev_json;
      return cmd::evaluate(ev);
    }
    if (*r) {
      apply_sampler_flags(run.sample, run_flags);
      return cmd::run(run);
    }
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return cmd::kUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return cmd::kDataError;
  }
  return cmd::kUsage;
}
