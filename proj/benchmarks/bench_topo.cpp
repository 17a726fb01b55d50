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

#include "tcprune/topo.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace tcprune;

MaskStack random_stack(int width, int depth, double density, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(density);
  std::vector<BinaryMatrix> layers;
  for (int l = 0; l < depth; ++l) {
    BinaryMatrix m(width, width);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng);
    layers.push_back(std::move(m));
  }
  return MaskStack::from_layers(std::move(layers));
}

void BM_PhiForward(benchmark::State& state) {
  const MaskStack masks = random_stack(static_cast<int>(state.range(0)), 4, 0.05, 1);
  for (auto _ : state) benchmark::DoNotOptimize(phi_forward(masks));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(masks.kept()));
}
BENCHMARK(BM_PhiForward)->RangeMultiplier(4)->Range(16, 1024);

void BM_ReachabilityOracle(benchmark::State& state) {
  const MaskStack masks = random_stack(static_cast<int>(state.range(0)), 4, 0.05, 2);
  for (auto _ : state) benchmark::DoNotOptimize(reachability_oracle(masks));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(masks.kept()));
}
BENCHMARK(BM_ReachabilityOracle)->RangeMultiplier(4)->Range(16, 1024);

void BM_MaskProducts(benchmark::State& state) {
  const MaskStack masks = random_stack(static_cast<int>(state.range(0)), 4, 0.05, 3);
  for (auto _ : state) benchmark::DoNotOptimize(sa_sc_products(masks));
}
BENCHMARK(BM_MaskProducts)->RangeMultiplier(4)->Range(16, 256);

void BM_ConsistencyReport(benchmark::State& state) {
  const MaskStack masks = random_stack(static_cast<int>(state.range(0)), 4, 0.05, 4);
  for (auto _ : state) benchmark::DoNotOptimize(consistency_report(masks));
}
BENCHMARK(BM_ConsistencyReport)->RangeMultiplier(4)->Range(16, 1024);

}  // namespace
