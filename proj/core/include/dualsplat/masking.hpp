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
#include <span>
#include <vector>

#include "dualsplat/image.hpp"

namespace dualsplat {

// Raw patch tokens for a stack of views. Token p of view v holds the patch's
// pixels row-major, channels innermost (D = 3 * patch^2).
struct TokenGrid {
  int views = 0;
  int patch = 0;
  int grid_h = 0;
  int grid_w = 0;
  std::size_t dim = 0;
  std::vector<Real> tokens;  // views x N_p x dim

  std::size_t patches() const { return static_cast<std::size_t>(grid_h) * grid_w; }
  std::span<const Real> token(int view, std::size_t p) const {
    return {tokens.data() + (view * patches() + p) * dim, dim};
  }
};

// Throws Error(kBadPatchGrid) when H or W is not a multiple of patch.
TokenGrid patchify(std::span<const Image> views, int patch);
TokenGrid patchify(const Image& img, int patch);
Image unpatchify(const TokenGrid& grid, int view);

// 1 = hidden.
using Mask = std::vector<std::uint8_t>;

// round(ratio * n) with exact halves rounded down.
std::size_t mask_count(Real ratio, std::size_t n);

// Hides exactly round(rho_e * n_p) positions, drawn without replacement from a
// stream keyed on (seed, view).
Mask random_encoder_mask(std::size_t n_p, Real rho_e, std::uint64_t seed, std::size_t view = 0);

// Mean of J over each patch footprint.
std::vector<Real> pool_importance(const Image& importance, int patch);

// `scores` has one entry per patch. The mask runs over the listed visible
// positions (same length as `visible`): hides the round(rho_d * |visible|)
// highest scores, ties to the lower patch index.
Mask geometry_mask(std::span<const Real> scores, std::span<const std::size_t> visible, Real rho_d);

std::vector<std::size_t> visible_indices(const Mask& enc_mask);

struct MaskSet {
  Real rho_e = 0.5;
  Real rho_d = 0.5;
  std::vector<Mask> enc;                       // per view, N_p entries
  std::vector<std::vector<std::size_t>> visible;  // Stage-1 survivors, ascending
  std::vector<Mask> dec;                       // per view, over `visible`

  // Patch indices that survive both stages.
  std::vector<std::size_t> kept(std::size_t view) const;
};

MaskSet make_encoder_masks(std::size_t views, std::size_t n_p, Real rho_e, std::uint64_t seed);
// Fills `dec` from per-view pooled scores.
void apply_geometry_masks(MaskSet& masks, std::span<const std::vector<Real>> scores, Real rho_d);

}  // namespace dualsplat
