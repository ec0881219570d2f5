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

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dualsplat/autodiff.hpp"
#include "dualsplat/camera.hpp"
#include "dualsplat/image.hpp"

namespace dualsplat {

inline constexpr Real kSsimWeight = 0.2;
inline constexpr int kSsimWindow = 11;
inline constexpr Real kSsimSigma = 1.5;
inline constexpr Real kPoseHuberDelta = 0.1;
inline constexpr Real kLambdaPose = 10.0;
inline constexpr Real kLambdaPoint = 1.0;
inline constexpr Real kReprojectionTolerancePx = 2.0;

// Mean SSIM over all valid 11x11 window positions and channels (Gaussian
// window, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2). Images narrower than the
// window use a window clipped to the image.
Real ssim(const Image& a, const Image& b);
// Tape version on HW x C tensors; differentiable in both arguments.
Tensor ssim(const Tensor& a, const Tensor& b, const ImageSize& size);

// Row-wise cosine similarity (N x 1). Rows with a zero vector score 0 and
// pass no gradient.
Tensor cosine_rows(const Tensor& a, const Tensor& b);

// Sum over views of mean |I_rend - I_gt| + 0.2 (1 - SSIM).
Tensor loss_rgb(std::span<const Tensor> rendered, std::span<const Tensor> target,
                const ImageSize& size);

// Sum over views and pixels of 1 - cos(F_rend, F_teacher).
Tensor loss_sem(std::span<const Tensor> rendered, std::span<const Tensor> teacher);

struct GeoLoss {
  Tensor pose;
  Tensor point;
};

// pose: sum of elementwise Huber (delta 0.1) over the V x 9 camera residual.
// Teacher quaternions are sign-aligned to the prediction first.
// point: sum over views and pixels of U~ |P~ - P|_2 + |U~ - U|, restricted to
// pixels whose weight in `valid` is nonzero (empty means all pixels).
GeoLoss loss_geo(const Tensor& cams_pred, const Tensor& cams_teacher,
                 std::span<const Tensor> points, std::span<const Tensor> confidence,
                 std::span<const Tensor> points_teacher, std::span<const Tensor> confidence_teacher,
                 std::span<const std::vector<std::uint8_t>> valid = {});

struct RecalibLoss {
  Tensor geo;
  Tensor sem;
  std::vector<std::size_t> valid_counts;  // per view
};

// Reprojects each view's point map through that view's camera, gathers the
// rendered image and semantics at the projected coordinates, and compares
// them with the rendered values at the source pixel. Projections behind the
// camera or more than 2 px outside the frame are skipped; each view's sum is
// rescaled by pixels / valid. An all-invalid view contributes 0.
RecalibLoss loss_recalib(std::span<const Tensor> rgb, std::span<const Tensor> semantics,
                         std::span<const Tensor> points, const Tensor& cams,
                         const ImageSize& size);

struct LossWeights {
  Real pose = kLambdaPose;
  Real point = kLambdaPoint;
};

struct LossReport {
  Real rgb = 0, sem = 0, pose = 0, point = 0, recalib_geo = 0, recalib_sem = 0, total = 0;
  Real lambda_pose = kLambdaPose;
  Real lambda_point = kLambdaPoint;
};

// Throws Error(kNonFiniteLoss) naming the first non-finite term.
LossReport total_loss(Real rgb, Real sem, Real pose, Real point, Real recalib_geo,
                      Real recalib_sem, const LossWeights& weights = {});

struct LossTerms {
  Tensor rgb, sem, pose, point, recalib_geo, recalib_sem;
};

struct WeightedLoss {
  Tensor total;
  LossReport report;
};

// Missing (undefined) terms count as zero.
WeightedLoss total_loss(const LossTerms& terms, const LossWeights& weights = {});

// {"step":n,"rgb":...,...,"total":...} followed by a newline.
void write_loss_jsonl(std::ostream& os, std::int64_t step, const LossReport& report);

}  // namespace dualsplat
