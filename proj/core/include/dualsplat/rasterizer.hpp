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

// Depth-sorted alpha compositing of 3D Gaussians with an exact analytic
// backward pass.
//
// Per pixel, splats are visited front to back (ascending camera depth, ties
// by input index) with alpha_i = min(0.999, sigma_i * exp(-0.5 d^T cov^-1 d))
// and weights w_i = alpha_i * prod_{j<i}(1 - alpha_j). Every channel
// (rgb, 64-d semantics, importance, camera depth) composites its per-splat
// payload with the same weights; a configurable background is blended with
// the final transmittance.

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dualsplat/camera.hpp"
#include "dualsplat/gaussian_field.hpp"
#include "dualsplat/image.hpp"

namespace dualsplat {

inline constexpr Real kMaxAlpha = 0.999;
inline constexpr Real kCovRegularizer = 0.1;     // px^2 added to the 2-D covariance
inline constexpr Real kTransmittanceStop = 1e-4;
inline constexpr Real kCullSigmas = 3.0;

struct Splat2D {
  std::size_t source = 0;  // input index
  PixelCoord mean2d;
  Real cov_xx = 0.0;
  Real cov_xy = 0.0;
  Real cov_yy = 0.0;
  Real depth = 0.0;  // camera-frame z
  Real sigma = 0.0;
};

// EWA projection. Empty when the center is behind the camera or the splat
// lies more than 3 standard deviations outside the frame.
std::optional<Splat2D> project_gaussian(const CameraParams& cam, const ImageSize& size,
                                        const Vec3& mu, const Vec4& r, const Vec3& s, Real sigma);
std::optional<Splat2D> project_gaussian(const CameraParams& cam, const ImageSize& size,
                                        const RenderGaussian& g);
std::optional<Splat2D> project_gaussian(const CameraParams& cam, const ImageSize& size,
                                        const GeometricGaussian& g);

struct RenderChannels {
  bool rgb = true;
  bool semantics = false;
  bool importance = false;
  bool depth = true;
};

enum class AlphaMode {
  kFalloff,      // sigma times the 2-D Gaussian falloff (default)
  kOpacityOnly,  // alpha = sigma for every pixel of a non-culled splat
};

struct RenderOptions {
  std::array<Real, 3> background_rgb{0.0, 0.0, 0.0};
  std::vector<Real> background_semantics;  // empty means zeros
  bool early_exit = true;
  // Footprint cutoff: pixels where sigma * falloff < alpha_floor are skipped.
  Real alpha_floor = 1e-9;
  AlphaMode alpha_mode = AlphaMode::kFalloff;
  std::size_t workers = 0;  // 0: hardware concurrency
};

// Planes not selected by the channel mask are left empty (0 x 0).
struct RenderedMaps {
  Image rgb;
  Image semantics;
  Image importance;
  Image depth;
  Image alpha;
};

// Read-only view over column-stacked Gaussian attributes. Channel spans may
// be empty when the corresponding channel is not rendered.
struct GaussianArrays {
  std::size_t count = 0;
  std::span<const Real> centers;     // N x 3
  std::span<const Real> opacity;     // N
  std::span<const Real> rotation;    // N x 4
  std::span<const Real> scales;      // N x 3
  std::span<const Real> colors;      // N x 3
  std::span<const Real> semantics;   // N x 64
  std::span<const Real> importance;  // N

  static GaussianArrays from(const GaussianTensors& field);
};

namespace detail {
struct RenderRecord;
}

// Forward record consumed by render_backward: projected splats, per-pixel
// depth-ordered lists, and per-entry alpha and transmittance.
class RenderTape {
 public:
  bool recorded() const { return record_ != nullptr; }
  const detail::RenderRecord& record() const { return *record_; }
  void reset(std::shared_ptr<const detail::RenderRecord> record) { record_ = std::move(record); }

 private:
  std::shared_ptr<const detail::RenderRecord> record_;
};

// Throws Error(kNonFiniteInput) on non-finite Gaussian parameters.
RenderedMaps render(const CameraParams& cam, const ImageSize& size, const GaussianArrays& field,
                    const RenderChannels& channels, const RenderOptions& options = {},
                    RenderTape* tape = nullptr);
RenderedMaps render(const CameraParams& cam, const ImageSize& size,
                    std::span<const RenderGaussian> field, const RenderChannels& channels,
                    const RenderOptions& options = {});

// Gradients of a scalar loss with respect to the rendered planes, laid out
// like the planes (H*W*C). Empty spans mean zero.
struct RenderUpstream {
  std::span<const Real> rgb;
  std::span<const Real> semantics;
  std::span<const Real> importance;
  std::span<const Real> depth;
  std::span<const Real> alpha;
};

struct RenderGradients {
  std::vector<Real> centers;
  std::vector<Real> opacity;
  std::vector<Real> rotation;
  std::vector<Real> scales;
  std::vector<Real> colors;
  std::vector<Real> semantics;
  std::vector<Real> importance;
  std::array<Real, kCameraDims> camera{};
};

// Throws Error(kNoForwardTape) when `tape` holds no recorded forward pass.
RenderGradients render_backward(const RenderTape& tape, const RenderUpstream& upstream);

// Importance maps (composited beta) of a geometric field for every camera.
std::vector<Image> importance_for_masking(std::span<const CameraParams> cams,
                                          const ImageSize& size,
                                          std::span<const GeometricGaussian> field,
                                          const RenderOptions& options = {});
std::vector<Image> importance_for_masking(std::span<const CameraParams> cams,
                                          const ImageSize& size, const GaussianArrays& field,
                                          const RenderOptions& options = {});

// ---- tape node ---------------------------------------------------------------

struct RenderTensors {
  Tensor rgb;         // HW x 3
  Tensor semantics;   // HW x 64
  Tensor importance;  // HW x 1
  Tensor depth;       // HW x 1 (alpha-weighted camera z, not normalized)
  Tensor alpha;       // HW x 1
};

// Renders `field` through the 1 x 9 `camera_row` as a single recorded op whose
// backward is render_backward.
RenderTensors render_tensors(const Tensor& camera_row, const GaussianTensors& field,
                             const ImageSize& size, const RenderChannels& channels,
                             const RenderOptions& options = {});

}  // namespace dualsplat
