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

// Three-level Gaussian hierarchy: geometric Gaussians drive masking, anchors
// fan out into semantic Gaussians, and each semantic Gaussian fans out into
// appearance Gaussians. Value-level types serve I/O and tests; the
// `GaussianTensors` path is what the training graph uses.

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "dualsplat/autodiff.hpp"
#include "dualsplat/camera.hpp"

namespace dualsplat {

inline constexpr std::size_t kSemanticDims = 64;
inline constexpr std::size_t kGeometricFeatureDims = 11;  // opacity 1 + rotation 4 + scale 3 + color 3
inline constexpr std::size_t kFanOut = 10;
inline constexpr Real kMinScale = 1e-4;
inline constexpr Real kDefaultMaxScale = 1.0;

using SemanticFeature = std::array<Real, kSemanticDims>;
using GeometricFeature = std::array<Real, kGeometricFeatureDims>;

struct GeometricGaussian {
  Vec3 mu = Vec3::Zero();
  Real sigma = 0.5;
  Vec4 r{1.0, 0.0, 0.0, 0.0};
  Vec3 s = Vec3::Ones();
  Real beta = 0.0;
};

struct AnchorGaussian {
  Vec3 mu = Vec3::Zero();
  GeometricFeature eps{};
  SemanticFeature gamma{};
};

enum class GaussianLevel { kSemantic, kAppearance };

struct RenderGaussian {
  Vec3 center = Vec3::Zero();
  Vec3 color = Vec3::Constant(0.5);
  Real sigma = 0.5;
  Vec4 r{1.0, 0.0, 0.0, 0.0};
  Vec3 s = Vec3::Ones();
  SemanticFeature gamma{};
  GaussianLevel level = GaussianLevel::kSemantic;
};

struct ActivatedFeature {
  Real sigma = 0.0;
  Vec4 r;
  Vec3 s;
  Vec3 color;
};

// sigma = logistic(e[0]); r = normalize(e[1..5]); s = clamp(exp(e[5..8]),
// 1e-4, max_scale); color = logistic(e[8..11]). Throws
// Error(kDegenerateRotation) when the rotation slice is zero.
ActivatedFeature unpack_geometric_feature(std::span<const Real> eps,
                                          Real max_scale = kDefaultMaxScale);

// One child record: center offset, raw 11-vector, semantic feature.
struct OffsetRecord {
  Vec3 delta = Vec3::Zero();
  GeometricFeature attrs{};
  SemanticFeature gamma{};
};

enum class FineSemantics { kFresh, kCopyParent };

// `offsets` holds kFanOut records per parent, parent-major. Throws
// Error(kFanOutMismatch) on any other count.
std::vector<RenderGaussian> expand_anchors_to_semantic(std::span<const AnchorGaussian> anchors,
                                                       std::span<const OffsetRecord> offsets,
                                                       Real max_scale = kDefaultMaxScale);
std::vector<RenderGaussian> expand_semantic_to_appearance(
    std::span<const RenderGaussian> semantic, std::span<const OffsetRecord> offsets,
    FineSemantics semantics = FineSemantics::kFresh, Real max_scale = kDefaultMaxScale);

// ---- graph-side representation ---------------------------------------------

// Column-stacked Gaussian attributes on the tape, N rows each. Optional
// members may be undefined (e.g. geometric Gaussians carry no colors).
struct GaussianTensors {
  Tensor centers;   // N x 3
  Tensor opacity;   // N x 1, (0, 1)
  Tensor rotation;  // N x 4, unit
  Tensor scales;    // N x 3, positive
  Tensor colors;    // N x 3, [0, 1]
  Tensor semantics; // N x 64
  Tensor importance;  // N x 1, >= 0

  std::size_t count() const { return centers.defined() ? centers.rows() : 0; }
};

struct ActivatedTensors {
  Tensor opacity;
  Tensor rotation;
  Tensor scales;
  Tensor colors;
};

// Tape version of unpack_geometric_feature over an N x 11 tensor.
ActivatedTensors activate_geometric_features(const Tensor& raw, Real max_scale = kDefaultMaxScale);

// Tape version of one fan-out level. `deltas` (N*10 x 3), `raw_attrs`
// (N*10 x 11) and `semantics` (N*10 x 64, may be undefined) are
// parent-major.
GaussianTensors expand_level(const Tensor& parent_centers, const Tensor& deltas,
                             const Tensor& raw_attrs, const Tensor& semantics,
                             Real max_scale = kDefaultMaxScale);

// Union of several fields (row concatenation of every defined member).
GaussianTensors concat_fields(std::span<const GaussianTensors> fields);

std::vector<RenderGaussian> to_render_gaussians(const GaussianTensors& field, GaussianLevel level);
GaussianTensors from_render_gaussians(std::span<const RenderGaussian> gaussians);
GaussianTensors from_geometric_gaussians(std::span<const GeometricGaussian> gaussians);

// ---- text format -----------------------------------------------------------
// g <level> <cx> <cy> <cz> <sigma> <qw> <qx> <qy> <qz> <sx> <sy> <sz> <r> <g> <b> [64 gamma]

void write_gaussian_line(std::ostream& os, const RenderGaussian& g, bool with_semantics = true);
// Parses one `g ...` line. Throws Error(kIoError) on malformed input.
RenderGaussian parse_gaussian_line(const std::string& line);

const char* level_name(GaussianLevel level);

}  // namespace dualsplat
