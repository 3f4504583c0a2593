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

// Minimal in-process use of the library: generate spans, assemble traces,
// sample at a 2% budget and print how many anomalies were kept.

#include <cstdio>
#include <unordered_map>

#include "masstrace/pipeline.hpp"
#include "masstrace/synth_stream.hpp"

int main() {
  using namespace masstrace;

  GeneratorConfig gen;
  gen.n_traces = 20000;
  const auto stream = generate(gen);
  std::unordered_map<std::string, bool> anomalous;
  for (const auto& l : stream.labels) anomalous[l.trace_id] = l.anomaly;

  PipelineConfig cfg;
  cfg.controller.budget = 0.02;
  cfg.controller.clustering.bandwidth.h = {0.1, 0.3};
  SamplingPipeline sampler(cfg);
  TraceAssembler assembler;

  std::size_t kept = 0, kept_anomalies = 0;
  auto tally = [&](const std::vector<TraceDecision>& batch) {
    for (const auto& d : batch) {
      if (!d.decision.kept) continue;
      ++kept;
      kept_anomalies += anomalous[d.doc.trace_id];
    }
  };
  for (const auto& span : stream.spans)
    for (auto& trace : assembler.push(span)) tally(sampler.offer(std::move(trace)));
  for (auto& trace : assembler.flush()) tally(sampler.offer(std::move(trace)));
  tally(sampler.finish());

  std::printf("kept %zu of %zu traces, %zu of them anomalous\n", kept, stream.labels.size(),
              kept_anomalies);
  std::printf("live clusters: %zu\n", sampler.controller().clusterer().clusters().size());
}
