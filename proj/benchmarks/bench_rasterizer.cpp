// Copyright 2026 The dualsplat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dualsplat/rasterizer.hpp"

namespace dualsplat {
namespace {

std::vector<RenderGaussian> random_field(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> xy(-0.8, 0.8), z(2.5, 4.5), sc(0.02, 0.12),
      op(0.1, 0.9), unit(0.0, 1.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<RenderGaussian> out(n);
  for (auto& g : out) {
    g.center = Vec3(xy(rng), xy(rng), z(rng));
    g.s = Vec3(sc(rng), sc(rng), sc(rng));
    Vec4 q(n01(rng), n01(rng), n01(rng), n01(rng));
    g.r = q / q.norm();
    g.sigma = op(rng);
    g.color = Vec3(unit(rng), unit(rng), unit(rng));
    for (auto& v : g.gamma) v = unit(rng);
  }
  return out;
}

const CameraParams kCamera(Vec4(1, 0, 0, 0), Vec3::Zero(), 60, 60);
constexpr ImageSize kSize{64, 64};

void BM_RenderRgb(benchmark::State& state) {
  const GaussianTensors t =
      from_render_gaussians(random_field(static_cast<std::size_t>(state.range(0)), 1));
  const GaussianArrays field = GaussianArrays::from(t);
  for (auto _ : state) benchmark::DoNotOptimize(render(kCamera, kSize, field, {}));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RenderRgb)->RangeMultiplier(4)->Range(64, 16384)->Unit(benchmark::kMillisecond);

void BM_RenderAllChannels(benchmark::State& state) {
  const GaussianTensors t =
      from_render_gaussians(random_field(static_cast<std::size_t>(state.range(0)), 2));
  const GaussianArrays field = GaussianArrays::from(t);
  for (auto _ : state)
    benchmark::DoNotOptimize(render(kCamera, kSize, field, {true, true, false, true}));
}
BENCHMARK(BM_RenderAllChannels)->RangeMultiplier(4)->Range(64, 16384)->Unit(benchmark::kMillisecond);

void BM_RenderBackward(benchmark::State& state) {
  const GaussianTensors t =
      from_render_gaussians(random_field(static_cast<std::size_t>(state.range(0)), 3));
  const GaussianArrays field = GaussianArrays::from(t);
  RenderTape tape;
  render(kCamera, kSize, field, {true, true, false, true}, {}, &tape);
  const std::vector<Real> d_rgb(kSize.pixels() * 3, 1e-3), d_sem(kSize.pixels() * 64, 1e-3);
  RenderUpstream up;
  up.rgb = d_rgb;
  up.semantics = d_sem;
  for (auto _ : state) benchmark::DoNotOptimize(render_backward(tape, up));
}
BENCHMARK(BM_RenderBackward)->RangeMultiplier(4)->Range(64, 16384)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dualsplat

BENCHMARK_MAIN();
