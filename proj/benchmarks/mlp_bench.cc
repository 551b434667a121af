// Copyright 2026 The fairpate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>

#include "benchmark/benchmark.h"
#include "fairpate/dataset.h"
#include "fairpate/mlp.h"
#include "fairpate/random.h"

namespace fairpate {
namespace {

Dataset MakeData(size_t n) {
  SynthParams p;
  p.n = n;
  auto d = SynthBiased(p);
  if (!d.ok()) std::abort();
  return *std::move(d);
}

void BM_Forward(benchmark::State& state) {
  const Dataset data = MakeData(static_cast<size_t>(state.range(0)));
  const MlpParams params = MlpParams::Initialize({4, 32, 32, 2}, 1);
  ForwardCache cache;
  for (auto _ : state) {
    ForwardInto(params, data.features(), cache);
    benchmark::DoNotOptimize(cache.probs.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(1024);

void BM_Backward(benchmark::State& state) {
  const Dataset data = MakeData(static_cast<size_t>(state.range(0)));
  const MlpParams params = MlpParams::Initialize({4, 32, 32, 2}, 1);
  for (auto _ : state) {
    auto g = Backward(params, data.features(), data.labels());
    benchmark::DoNotOptimize(g);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Backward)->Arg(32)->Arg(1024);

void BM_TrainErm(benchmark::State& state) {
  const Dataset data = MakeData(2000);
  TrainConfig config;
  config.epochs = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto params = TrainErm(data, config);
    benchmark::DoNotOptimize(params);
  }
}
BENCHMARK(BM_TrainErm)->Arg(5)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace fairpate
