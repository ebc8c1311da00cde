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

#include "vmae/model.hpp"

namespace {

using namespace vmae::nn;

void BM_FactorizedLayer(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  torch::set_num_threads(1);
  const ModelConfig c = ModelConfig::desk();
  FactorizedLayer layer(c.dim, c.heads_spatial, c.heads_axial, c.mlp_ratio);
  const auto coords = full_coords(1, c.n_tokens());
  const Layouts layouts = make_layouts(coords, c);
  const Tokens in{torch::randn({1, c.n_tokens(), c.dim}), torch::randn({1, 1, c.dim}), coords};
  for (auto _ : state) benchmark::DoNotOptimize(layer->forward(in, layouts.slices, layouts.columns).x);
}
BENCHMARK(BM_FactorizedLayer)->Unit(benchmark::kMillisecond);

void BM_EncoderVisibleQuarter(benchmark::State& state) {
  torch::NoGradGuard no_grad;
  torch::set_num_threads(1);
  const ModelConfig c = ModelConfig::desk();
  Encoder enc(c);
  const int64_t visible = c.n_tokens() / 4;
  const auto coords = torch::randperm(c.n_tokens(), torch::kLong).slice(0, 0, visible).unsqueeze(0);
  const auto patches = torch::rand({1, visible, c.patch_values()});
  for (auto _ : state) benchmark::DoNotOptimize(enc->forward(patches, coords).x);
}
BENCHMARK(BM_EncoderVisibleQuarter)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
