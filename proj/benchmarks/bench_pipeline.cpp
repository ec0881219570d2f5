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

#include "dualsplat/config.hpp"
#include "dualsplat/train.hpp"

namespace dualsplat {
namespace {

RunConfig desk_config() {
  RunConfig c = preset("desk-overfit");
  c.seed = 7;
  sync_model_to_scene(c);
  return c;
}

void BM_Forward(benchmark::State& state) {
  const RunConfig c = desk_config();
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  const auto inputs = scene.pick(scene.images, scene.source);
  const ModelParams params = init_params(c.model);
  ForwardOptions fo;
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, c.model, inputs, fo));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const RunConfig c = desk_config();
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  Trainer trainer(c, scene);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond)->Iterations(10);

void BM_Evaluate(benchmark::State& state) {
  const RunConfig c = desk_config();
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  const ModelParams params = init_params(c.model);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(params, c, scene));
}
BENCHMARK(BM_Evaluate)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dualsplat

BENCHMARK_MAIN();
