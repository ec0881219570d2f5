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


#pragma once

// Flat `key = value` run configuration shared by every CLI subcommand.

#include <cstdint>
#include <string>

#include "dualsplat/network.hpp"
#include "dualsplat/objectives.hpp"
#include "dualsplat/optim.hpp"
#include "dualsplat/scene.hpp"
#include "dualsplat/teachers.hpp"

namespace dualsplat {

struct TrainSettings {
  int steps = 5000;
  AdamWConfig adamw;
  Real rho_e = 0.5;
  Real rho_d = 0.5;
  LossWeights weights;
  int checkpoint_every = 1000;
  int log_every = 1;
  std::size_t workers = 1;
};

// Masking applied when predicting for evaluation and rendering. Defaults
// match training so the network runs on the token counts it was trained on.
struct EvalSettings {
  Real rho_e = 0.5;
  Real rho_d = 0.5;
};

struct RunConfig {
  std::uint64_t seed = 0;
  SceneConfig scene;
  ModelConfig model;
  PoseNoise noise;
  TrainSettings train;
  EvalSettings eval;
};

// Applies `key = value` lines over `base`. '#' starts a comment; blank lines
// are skipped. Unknown keys and unparsable values throw Error(kConfigError)
// with the line number.
RunConfig parse_config(const std::string& text, RunConfig base = {});

// Named presets; throws Error(kConfigError) for an unknown name.
RunConfig preset(const std::string& name);
bool is_preset(const std::string& name);

// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

// Derives the model geometry (views, image size, focal prior, scene center)
// from the scene settings.
void sync_model_to_scene(RunConfig& config);

}  // namespace dualsplat
