// Copyright 2026 The tcprune Authors
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

#include "tcprune/config.hpp"
#include "tcprune/data.hpp"
#include "tcprune/loss.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace tcprune;

struct ToyProblem {
  NetworkSpec spec;
  MaskedWeights weights;
  Batch batch;
  PruneConfig config;
};

ToyProblem toy(int batch_size, bool tc) {
  SyntheticConfig gen = preset_data("toy");
  gen.sequences_per_class = (batch_size + gen.classes - 1) / gen.classes;
  const Dataset data = gen_synthetic(gen);
  ToyProblem p;
  p.spec = preset_network("toy", data.joints, data.chunks, data.classes);
  p.weights = init_weights(p.spec, 1, data.adjacency);
  std::vector<int> idx;
  for (int i = 0; i < batch_size; ++i) idx.push_back(i);
  p.batch = Batch{stack_signals(data, idx), gather_labels(data, idx)};
  p.config.target = 0.05 * static_cast<double>(p.spec.prunable_count());
  p.config.tc_enabled = tc;
  return p;
}

void BM_TotalLoss(benchmark::State& state) {
  const ToyProblem p = toy(static_cast<int>(state.range(0)), state.range(1) != 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(total_loss(p.spec, p.weights, p.batch, 0.01, p.config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TotalLoss)->ArgsProduct({{32, 120}, {0, 1}});

void BM_Backward(benchmark::State& state) {
  const ToyProblem p = toy(static_cast<int>(state.range(0)), state.range(1) != 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward(p.spec, p.weights, p.batch, 0.01, p.config));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->ArgsProduct({{32, 120}, {0, 1}});

}  // namespace
