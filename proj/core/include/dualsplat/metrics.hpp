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

// Evaluation metrics for rendered views, semantic maps, depth, and poses.

#include <optional>
#include <span>
#include <vector>

#include "dualsplat/camera.hpp"
#include "dualsplat/image.hpp"

namespace dualsplat {

inline constexpr Real kPsnrCap = 99.0;
inline constexpr Real kDepthInlierRatio = 1.25;

// -10 log10(MSE) on [0, 1] values, capped at 99 dB.
Real psnr(const Image& a, const Image& b);

// Per-pixel class: argmax over codes of the cosine with the rendered feature.
std::vector<int> decode_semantics(const Image& features, std::span<const std::vector<Real>> codes);

struct SegmentationScores {
  Real miou = 0.0;       // over classes present in prediction or ground truth
  Real pix_acc = 0.0;
};
SegmentationScores segmentation_scores(std::span<const std::vector<int>> predicted,
                                       std::span<const std::vector<int>> truth, int num_classes);

struct DepthScores {
  Real abs_rel = 0.0;  // mean |d - d~| / d~
  Real tau = 0.0;      // fraction with max(d / d~, d~ / d) < 1.25
  std::size_t count = 0;
};
// Valid pixels have positive reference and predicted depth; nullopt if none.
std::optional<DepthScores> depth_scores(std::span<const Image> predicted,
                                        std::span<const Image> reference);

// Area under the accuracy-vs-threshold curve on [0, threshold], normalized:
// mean over errors of max(0, 1 - e / threshold).
Real pose_auc(std::span<const Real> errors_degrees, Real threshold_degrees);

// Relative rotation errors over all unordered pairs (i < j).
std::vector<Real> pairwise_rotation_errors(std::span<const CameraParams> predicted,
                                           std::span<const CameraParams> reference);

struct MetricsReport {
  Real psnr = 0, ssim = 0, miou = 0, pix_acc = 0;
  std::optional<Real> abs_rel, abs_rel_percent, tau;
  Real pose_auc5 = 0, pose_auc10 = 0, pose_auc20 = 0;
  Real max_rotation_error = 0;
};

}  // namespace dualsplat
