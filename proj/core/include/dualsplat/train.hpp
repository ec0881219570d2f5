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

// Training loop and evaluation over a synthetic scene.

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "dualsplat/config.hpp"
#include "dualsplat/metrics.hpp"
#include "dualsplat/network.hpp"
#include "dualsplat/objectives.hpp"
#include "dualsplat/optim.hpp"
#include "dualsplat/rasterizer.hpp"
#include "dualsplat/scene.hpp"
#include "dualsplat/teachers.hpp"

namespace dualsplat {

// Everything one optimizer step needs, in the canonical frame of source view 0.
struct TrainingData {
  std::vector<Image> inputs;          // source images
  std::vector<Tensor> rgb_targets;    // HW x 3
  std::vector<Tensor> sem_targets;    // HW x 64
  std::vector<Tensor> point_targets;  // HW x 3
  std::vector<Tensor> conf_targets;   // HW x 1
  std::vector<std::vector<std::uint8_t>> valid;
  Tensor camera_targets;              // V x 9, canonical
  std::vector<Real> background_code;  // background class code
};

TrainingData make_training_data(const SyntheticScene& scene, const OracleTeachers& canonical);

struct StepGraph {
  ForwardOutputs forward;
  Tensor cameras;  // canonical C_final
  std::vector<Tensor> rgb, semantics;
  WeightedLoss loss;
};

// Builds the full objective for one step; `mask_seed` fixes both masks.
StepGraph build_step(const ModelParams& params, const RunConfig& config, const TrainingData& data,
                     std::uint64_t mask_seed);

std::uint64_t step_mask_seed(std::uint64_t seed, std::int64_t step);

class Trainer {
 public:
  Trainer(const RunConfig& config, const SyntheticScene& scene);

  // One AdamW step; returns the loss breakdown of the pre-update graph.
  // NonFiniteLoss / NonFiniteGrad errors are rethrown with the step index.
  LossReport step();

  std::int64_t steps_done() const { return step_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }
  const RunConfig& config() const { return config_; }
  const TrainingData& data() const { return data_; }

 private:
  RunConfig config_;
  TrainingData data_;
  ModelParams params_;
  std::unique_ptr<AdamW> optim_;
  std::int64_t step_ = 0;
};

struct TrainHooks {
  std::ostream* loss_log = nullptr;  // JSON lines
  // Called after steps divisible by checkpoint_every and after the last step
  // (also at step 0 when no steps run).
  std::function<void(std::int64_t step, const ModelParams&)> checkpoint;
  std::function<void(std::int64_t step, const LossReport&)> progress;
};

std::vector<LossReport> train(Trainer& trainer, const TrainHooks& hooks = {});

struct Prediction {
  ForwardOutputs outputs;
  std::vector<CameraParams> cameras;  // canonical C_final
};

// Fixed mask stream for evaluation, distinct from every training step.
std::uint64_t eval_mask_seed(std::uint64_t seed);

// Forward pass with the eval.* masking ratios and eval_mask_seed.
Prediction predict(const ModelParams& params, const RunConfig& config,
                   std::span<const Image> inputs);

struct ViewRender {
  Image rgb;
  Image semantics;
  Image depth;  // alpha-normalized expected depth, 0 where alpha ~ 0
};

ViewRender render_prediction(const Prediction& prediction, const CameraParams& camera,
                             const ImageSize& size, const RunConfig& config,
                             std::span<const Real> background_code);

// Ground-truth cameras of every scene view in the frame of source view 0.
std::vector<CameraParams> canonical_scene_cameras(const SyntheticScene& scene);

struct EvalReport {
  MetricsReport source;
  MetricsReport heldout;
  std::vector<Real> rotation_errors;  // source pairs, degrees
};

EvalReport evaluate(const ModelParams& params, const RunConfig& config,
                    const SyntheticScene& scene);

void write_metrics_jsonl(std::ostream& os, const std::string& split, const MetricsReport& m);

}  // namespace dualsplat
