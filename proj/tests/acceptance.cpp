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


// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "masstrace/commands.hpp"
#include "masstrace/controller.hpp"
#include "masstrace/evaluation.hpp"
#include "masstrace/hst_forest.hpp"
#include "masstrace/mass_clustering.hpp"
#include "masstrace/pipeline.hpp"
#include "masstrace/synth_stream.hpp"
#include "oracles.hpp"

namespace {

using namespace masstrace;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += !o.pass;
  std::printf("%s  %-28s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome mean_shift_check() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int cfg = 0; cfg < 200; ++cfg) {
    const std::size_t d = 1 + rng() % 3;
    const std::size_t n = 1 + rng() % 500;
    const double h = 0.05 + 0.45 * u(rng);
    std::vector<std::vector<double>> s(n, std::vector<double>(d));
    for (auto& p : s)
      for (auto& v : p) v = u(rng);
    const auto x = s[rng() % n];
    std::vector<double> mean(d, 0.0);
    std::size_t inside = 0;
    for (const auto& p : s) {
      bool in = true;
      for (std::size_t k = 0; k < d; ++k) in = in && std::abs(p[k] - x[k]) < h;
      if (!in) continue;
      ++inside;
      for (std::size_t k = 0; k < d; ++k) mean[k] += p[k];
    }
    const auto step = mean_shift_step(s, x, h);
    for (std::size_t k = 0; k < d; ++k)
      worst = std::max(worst, std::abs(step[k] - mean[k] / static_cast<double>(inside)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 5.0,
          fmt("200 configs, max |step - cube mean| = %.2e, %.2f s", worst, secs)};
}

Outcome kernel_check() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::string detail;
  bool ok = true;
  for (std::size_t d = 1; d <= 3; ++d) {
    const int n = 1000000;
    std::vector<double> x(d);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      for (auto& v : x) v = u(rng);
      sum += additive_kernel(x);
    }
    const double integral = sum / n * std::ldexp(1.0, static_cast<int>(d));
    ok = ok && std::abs(integral - 1.0) <= 0.01;
    detail += fmt("d=%zu: %.4f  ", d, integral);
  }
  const std::vector<std::vector<double>> boundary{
      {1.0}, {-1.0}, {1.0, 0.0}, {0.0, -1.0}, {0.5, 0.5, 1.0}, {2.0, 0.0, 0.0}};
  for (const auto& b : boundary) ok = ok && additive_kernel(b) == 0.0;
  return {ok, detail + "boundaries exact 0"};
}

// Feature vectors from a synthetic stream, as the pipeline builds them.
std::vector<ScaledVector> stream_features(std::size_t n, std::size_t& dims) {
  GeneratorConfig g;
  g.n_traces = n;
  const auto s = generate(g);
  TraceAssembler a(1);
  std::vector<TraceDocument> docs;
  for (const auto& sp : s.spans)
    for (auto& d : a.push(sp)) docs.push_back(std::move(d));
  for (auto& d : a.flush()) docs.push_back(std::move(d));
  Vocabulary vocab;
  std::vector<CountVector> counts;
  for (const auto& d : docs) counts.push_back(vectorize(d, vocab));
  dims = vocab.size();
  std::vector<ScaledVector> out;
  for (const auto& c : counts) out.push_back(transform(c, dims, CountTransform::kIdentity));
  return out;
}

Outcome mass_conservation_check() {
  std::size_t dims = 0;
  const auto points = stream_features(10000, dims);
  const auto t0 = Clock::now();
  ForestConfig cfg;
  cfg.dims = dims;
  const std::size_t train = 2000;
  HalfSpaceForest forest(cfg, std::span(points).first(train));
  for (std::size_t i = train; i < points.size(); ++i) forest.update(points[i]);
  std::size_t nodes = 0, mismatches = 0;
  for (const auto& tree : forest.trees()) {
    const auto recount = oracle::recount_masses(tree, points);
    nodes += recount.size();
    for (std::size_t i = 0; i < recount.size(); ++i) mismatches += recount[i] != tree.nodes()[i].mass;
    for (std::size_t level = 0; level <= tree.depth(); ++level) {
      std::uint64_t sum = 0;
      for (const auto& n : tree.nodes())
        if (n.level == level || (n.is_leaf() && n.level < level)) sum += n.mass;
      mismatches += sum != points.size();
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          fmt("%zu points, %zu nodes over %zu trees, %zu mismatches, %.2f s", points.size(),
              nodes, forest.trees().size(), mismatches, secs)};
}

// ---------------------------------------------------------------------------

struct StreamRun {
  std::vector<bool> kept;
  std::vector<double> latency_ms;  // post warm-up traces only
  double seconds = 0.0;
};

std::vector<TraceDocument> documents(const SyntheticStream& s) {
  TraceAssembler a;
  std::vector<TraceDocument> docs;
  for (const auto& sp : s.spans)
    for (auto& d : a.push(sp)) docs.push_back(std::move(d));
  for (auto& d : a.flush()) docs.push_back(std::move(d));
  return docs;
}

StreamRun run_pipeline(const std::vector<TraceDocument>& docs, PipelineConfig cfg) {
  StreamRun r;
  const auto t0 = Clock::now();
  SamplingPipeline p(cfg);
  for (const auto& d : docs) {
    const auto s = Clock::now();
    const auto out = p.offer(d);
    if (out.size() == 1 && p.warmed_up() && r.kept.size() >= cfg.warmup)
      r.latency_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - s).count());
    for (const auto& td : out) r.kept.push_back(td.decision.kept);
  }
  for (const auto& td : p.finish()) r.kept.push_back(td.decision.kept);
  r.seconds = seconds_since(t0);
  return r;
}

Outcome budget_check(const std::vector<TraceDocument>& docs) {
  std::string detail;
  bool ok = true;
  for (double tau : {0.005, 0.01, 0.02, 0.05, 0.10}) {
    PipelineConfig cfg;
    cfg.controller.budget = tau;
    const auto r = run_pipeline(docs, cfg);
    const std::size_t w = cfg.controller.window;
    const std::size_t cap = window_target(tau, w);
    std::size_t worst = 0, total = 0;
    for (std::size_t start = 0; start < r.kept.size(); start += w) {
      const auto end = std::min(r.kept.size(), start + w);
      const auto k = static_cast<std::size_t>(
          std::count(r.kept.begin() + static_cast<std::ptrdiff_t>(start),
                     r.kept.begin() + static_cast<std::ptrdiff_t>(end), true));
      worst = std::max(worst, k);
      total += k;
    }
    ok = ok && worst <= cap && r.kept.size() == docs.size();
    detail += fmt("%.3g: max %zu/%zu kept %zu; ", tau, worst, cap, total);
  }
  return {ok, fmt("%zu traces; ", docs.size()) + detail};
}

// ---------------------------------------------------------------------------

Outcome formula_check() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 1000;
  std::size_t bad_k = 0, bad_s = 0, bad_j = 0, bad_m = 0, bad_f = 0;

  for (int i = 0; i < n; ++i) {
    // chebyshev_k: solve 1 - 1/k^2 = tau / theta by bisection on k >= 1.
    const double theta = 0.01 + 0.99 * u(rng);
    const double tau = theta * (0.001 + 0.99 * u(rng));
    double lo = 1.0, hi = 1e8;
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      (1.0 - 1.0 / (mid * mid) < tau / theta ? lo : hi) = mid;
    }
    const double k = chebyshev_k(tau, theta);
    bad_k += std::abs(k - 0.5 * (lo + hi)) > 1e-12 * k;

    // eagerness on a grid of exact thousandths, integer oracle.
    const long a = static_cast<long>(rng() % 1001), b = static_cast<long>(rng() % 1001);
    const double want = static_cast<double>(a * (1000 - b)) / 1e6;
    bad_s += std::abs(eagerness(a / 1000.0, b / 1000.0) - want) > 1e-12;

    // jain against 1 / (1 + CV^2) with population variance.
    const std::size_t g = 1 + rng() % 12;
    std::vector<double> t(g), o(g);
    double mean = 0.0;
    std::vector<double> x(g);
    for (std::size_t q = 0; q < g; ++q) {
      t[q] = 10.0 * u(rng);
      o[q] = 0.5 + 10.0 * u(rng);
      x[q] = t[q] / o[q];
      mean += x[q];
    }
    mean /= static_cast<double>(g);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(g);
    bad_j += std::abs(jain(t, o) - 1.0 / (1.0 + var / (mean * mean))) > 1e-12;

    // attempts: tau = a'/1000, coverage = b'/1000, floor((2a' - b') / (2b')).
    const long ta = 1 + static_cast<long>(rng() % 500), cb = 1 + static_cast<long>(rng() % 500);
    const long num = 2 * ta - cb, den = 2 * cb;
    const long m = num < 0 ? 0 : num / den;
    bad_m += extra_attempts(ta / 1000.0, cb / 1000.0) != static_cast<std::size_t>(m);

    // maxmin_fair against bisection water-filling.
    const std::size_t groups = 1 + rng() % 10;
    std::vector<double> sizes(groups);
    double total = 0.0;
    for (auto& s : sizes) total += (s = static_cast<double>(rng() % 200));
    const double budget = std::floor(total * u(rng));
    const auto got = maxmin_fair(sizes, budget);
    const auto water = oracle::water_fill(sizes, budget);
    for (std::size_t q = 0; q < groups; ++q)
      bad_f += std::abs(got[q] - water[q]) > 1e-12 * std::max(1.0, water[q]);
  }
  const bool ok = bad_k + bad_s + bad_j + bad_m + bad_f == 0;
  return {ok, fmt("%d inputs each; mismatches chebyshev_k %zu, eagerness %zu, jain %zu, "
                  "attempts %zu, maxmin_fair %zu",
                  n, bad_k, bad_s, bad_j, bad_m, bad_f)};
}

// ---------------------------------------------------------------------------

struct Workdir {
  fs::path root = fs::temp_directory_path() / ("masstrace-accept-" + std::to_string(::getpid()));
  Workdir() {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workdir() { fs::remove_all(root); }
};

struct Scored {
  EvaluationRow row;
  double seconds = 0.0;
};

Scored sample_and_score(const fs::path& spans, const fs::path& labels, const fs::path& out,
                        double tau, Point2 bandwidth) {
  cmd::SampleOptions opt;
  opt.input = spans;
  opt.out_dir = out;
  opt.pipeline.controller.budget = tau;
  opt.pipeline.controller.clustering.bandwidth.h = bandwidth;
  std::ostringstream log;
  const auto t0 = Clock::now();
  if (cmd::sample(opt, log) != cmd::kOk) throw std::runtime_error("sample failed: " + log.str());
  const double secs = seconds_since(t0);
  cmd::EvaluateOptions e{labels, {out / "decisions.jsonl"}, {tau}, {}, {}};
  return {cmd::evaluate_logs(e).at(0), secs};
}

EvaluationRow uniform_score(const fs::path& spans, const fs::path& labels, const fs::path& out,
                            double tau) {
  cmd::UniformOptions u{spans, out, tau, 43, TraceAssembler::kDefaultFlushGap};
  std::ostringstream log;
  if (cmd::uniform(u, log) != cmd::kOk) throw std::runtime_error("uniform failed");
  cmd::EvaluateOptions e{labels, {out / "decisions.jsonl"}, {tau}, {}, {}};
  return cmd::evaluate_logs(e).at(0);
}

}  // namespace

int main() {
  std::printf("masstrace acceptance\n");

  report("mean-shift-step", mean_shift_check);
  report("kernel-normalization", kernel_check);
  report("mass-conservation", mass_conservation_check);

  GeneratorConfig g;
  g.n_traces = 50000;
  const auto docs = documents(generate(g));
  report("budget-per-window", [&] { return budget_check(docs); });
  report("formula-oracles", formula_check);

  Workdir work;
  cmd::GenerateOptions gen{g, work.root / "spans.jsonl", work.root / "labels.csv"};
  if (cmd::generate(gen) != cmd::kOk) {
    std::printf("FAIL  could not write synthetic stream\n");
    return 1;
  }
  const auto& spans = gen.spans_out;
  const auto& labels = gen.labels_out;

  Scored at5{};
  report("end-to-end-5pct", [&] {
    at5 = sample_and_score(spans, labels, work.root / "m5", 0.05, {0.1, 0.1});
    const auto& r = at5.row;
    return Outcome{r.f1 >= 0.80 && r.precision >= 0.80 && at5.seconds < 120.0,
                   fmt("F1 %.3f (>= 0.80), P %.3f (>= 0.80), R %.3f, %.1f s", r.f1,
                       r.precision, r.recall, at5.seconds)};
  });
  report("end-to-end-0.5pct", [&] {
    const auto m = sample_and_score(spans, labels, work.root / "m05", 0.005, {0.1, 0.1});
    const auto un = uniform_score(spans, labels, work.root / "u05", 0.005);
    return Outcome{m.row.precision >= 5.0 * un.precision && m.seconds < 120.0,
                   fmt("P %.3f vs uniform %.3f (need >= %.3f), %.1f s", m.row.precision,
                       un.precision, 5.0 * un.precision, m.seconds)};
  });
  report("end-to-end-10pct", [&] {
    const auto m = sample_and_score(spans, labels, work.root / "m10", 0.10, {0.1, 0.1});
    const auto un = uniform_score(spans, labels, work.root / "u10", 0.10);
    return Outcome{m.row.recall >= 0.85 && m.row.jain >= un.jain && m.seconds < 120.0,
                   fmt("R %.3f (>= 0.85), J %.3f vs uniform %.3f, %.1f s", m.row.recall,
                       m.row.jain, un.jain, m.seconds)};
  });
  report("rectangular-bandwidth", [&] {
    const auto wide = sample_and_score(spans, labels, work.root / "rect", 0.05, {0.1, 0.3});
    return Outcome{wide.row.f1 >= at5.row.f1 - 0.02,
                   fmt("F1 [0.1,0.3] %.3f vs [0.1,0.1] %.3f (tolerance 0.02)", wide.row.f1,
                       at5.row.f1)};
  });
  report("per-trace-latency", [&] {
    PipelineConfig cfg;  // 25 trees, depth 15
    auto r = run_pipeline(docs, cfg);
    auto& lat = r.latency_ms;
    std::nth_element(lat.begin(), lat.begin() + static_cast<std::ptrdiff_t>(lat.size() / 2),
                     lat.end());
    const double median = lat[lat.size() / 2];
    return Outcome{median < 1.0, fmt("median %.4f ms over %zu traces (trees %zu, depth %zu)",
                                     median, lat.size(), cfg.forest.trees, cfg.forest.depth)};
  });
  report("deterministic-decisions", [&] {
    cmd::SampleOptions opt;
    opt.input = spans;
    std::ostringstream log;
    opt.out_dir = work.root / "det-a";
    cmd::sample(opt, log);
    opt.out_dir = work.root / "det-b";
    cmd::sample(opt, log);
    auto read = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    };
    const auto a = read(work.root / "det-a/decisions.jsonl");
    const auto b = read(work.root / "det-b/decisions.jsonl");
    return Outcome{!a.empty() && a == b, fmt("%zu bytes, identical: %s", a.size(),
                                             a == b ? "yes" : "no")};
  });

  std::printf("%s: %d failing\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
  return failures == 0 ? 0 : 1;
}
