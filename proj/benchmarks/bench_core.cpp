// Copyright 2026 The vmae Authors
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

#include <benchmark/benchmark.h>

#include "vmae/geometry.hpp"
#include "vmae/hungarian.hpp"
#include "vmae/rng.hpp"
#include "vmae/sampling.hpp"
#include "vmae/synthvasc.hpp"

namespace {

using namespace vmae;

const Case& phantom() {
  static const Case c = [] {
    PhantomParams p;
    p.seed = 3;
    return generate_case(p, 0);
  }();
  return c;
}

void BM_SignedDistance(benchmark::State& state) {
  const Case& c = phantom();
  for (auto _ : state) benchmark::DoNotOptimize(signed_distance_map(c.artery_mask, c.spacing));
  state.SetItemsProcessed(state.iterations() * c.artery_mask.dims().count());
}
BENCHMARK(BM_SignedDistance)->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(1);
  CostMatrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(0, 100);
  }
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_match(m));
}
BENCHMARK(BM_Hungarian)->Arg(8)->Arg(32)->Arg(128);

void BM_SampleCrop(benchmark::State& state) {
  const Case& c = phantom();
  const DistanceMap dm = signed_distance_map(c.artery_mask, c.spacing);
  const CropSampler sampler(c, dm);
  Rng rng(2);
  for (auto _ : state) benchmark::DoNotOptimize(sampler.sample(rng));
}
BENCHMARK(BM_SampleCrop)->Unit(benchmark::kMicrosecond);

void BM_PlanMask(benchmark::State& state) {
  Rng rng(4);
  std::vector<float> frac(4096);
  for (auto& f : frac) f = static_cast<float>(rng.uniform());
  MaskPolicy policy;
  for (auto _ : state) benchmark::DoNotOptimize(plan_mask(frac, policy, rng));
}
BENCHMARK(BM_PlanMask)->Unit(benchmark::kMicrosecond);

}  // namespace
