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

#include "dualsplat/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Unbiased draw in [0, bound) by rejection.
std::uint64_t draw_below(std::uint64_t& state, std::uint64_t bound) {
  const std::uint64_t limit = ~0ull - (~0ull % bound);
  for (;;) {
    const std::uint64_t r = splitmix64(state);
    if (r < limit) return r % bound;
  }
}

void check_ratio(Real r, const char* what) {
  if (!(r >= 0.0 && r < 1.0)) {
    throw Error(ErrorCode::kConfigError, std::string(what) + " must lie in [0, 1)");
  }
}

}  // namespace

// Ties round toward fewer hidden positions so that the kept count is
// round((1 - ratio) * n) with ties up.
std::size_t mask_count(Real ratio, std::size_t n) {
  return n - static_cast<std::size_t>(std::llround((1.0 - ratio) * static_cast<Real>(n)));
}

TokenGrid patchify(std::span<const Image> views, int patch) {
  if (views.empty() || patch <= 0) throw Error(ErrorCode::kBadPatchGrid, "no views or patch <= 0");
  const int h = views[0].height, w = views[0].width, c = views[0].channels;
  if (h % patch != 0 || w % patch != 0) {
    throw Error(ErrorCode::kBadPatchGrid, std::to_string(h) + "x" + std::to_string(w) +
                                              " is not divisible by patch " + std::to_string(patch));
  }
  TokenGrid g;
  g.views = static_cast<int>(views.size());
  g.patch = patch;
  g.grid_h = h / patch;
  g.grid_w = w / patch;
  g.dim = static_cast<std::size_t>(patch) * patch * c;
  g.tokens.resize(g.views * g.patches() * g.dim);
  for (int v = 0; v < g.views; ++v) {
    const Image& img = views[v];
    if (img.height != h || img.width != w || img.channels != c) {
      throw Error(ErrorCode::kBadPatchGrid, "views differ in size");
    }
    for (int py = 0; py < g.grid_h; ++py) {
      for (int px = 0; px < g.grid_w; ++px) {
        Real* out = &g.tokens[(v * g.patches() + py * g.grid_w + px) * g.dim];
        for (int y = 0; y < patch; ++y)
          for (int x = 0; x < patch; ++x)
            for (int ch = 0; ch < c; ++ch) *out++ = img.at(py * patch + y, px * patch + x, ch);
      }
    }
  }
  return g;
}

TokenGrid patchify(const Image& img, int patch) { return patchify(std::span(&img, 1), patch); }

Image unpatchify(const TokenGrid& g, int view) {
  const int c = static_cast<int>(g.dim / (static_cast<std::size_t>(g.patch) * g.patch));
  Image img(g.grid_h * g.patch, g.grid_w * g.patch, c);
  for (int py = 0; py < g.grid_h; ++py) {
    for (int px = 0; px < g.grid_w; ++px) {
      const Real* in = g.token(view, py * g.grid_w + px).data();
      for (int y = 0; y < g.patch; ++y)
        for (int x = 0; x < g.patch; ++x)
          for (int ch = 0; ch < c; ++ch) img.at(py * g.patch + y, px * g.patch + x, ch) = *in++;
    }
  }
  return img;
}

Mask random_encoder_mask(std::size_t n_p, Real rho_e, std::uint64_t seed, std::size_t view) {
  check_ratio(rho_e, "rho_e");
  std::uint64_t state = seed;
  state = splitmix64(state) ^ (0xD1B54A32D192ED03ull * (view + 1));
  std::vector<std::size_t> order(n_p);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t hide = mask_count(rho_e, n_p);
  // Partial Fisher-Yates: the first `hide` slots are a uniform sample.
  for (std::size_t i = 0; i < hide; ++i) {
    const std::size_t j = i + draw_below(state, n_p - i);
    std::swap(order[i], order[j]);
  }
  Mask m(n_p, 0);
  for (std::size_t i = 0; i < hide; ++i) m[order[i]] = 1;
  return m;
}

std::vector<Real> pool_importance(const Image& j, int patch) {
  if (patch <= 0 || j.height % patch != 0 || j.width % patch != 0) {
    throw Error(ErrorCode::kBadPatchGrid, "importance map does not tile into patches");
  }
  const int gh = j.height / patch, gw = j.width / patch;
  std::vector<Real> out(static_cast<std::size_t>(gh) * gw, 0.0);
  const Real inv = 1.0 / (static_cast<Real>(patch) * patch);
  for (int py = 0; py < gh; ++py) {
    for (int px = 0; px < gw; ++px) {
      Real s = 0.0;
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x) s += j.at(py * patch + y, px * patch + x, 0);
      out[static_cast<std::size_t>(py) * gw + px] = s * inv;
    }
  }
  return out;
}

Mask geometry_mask(std::span<const Real> scores, std::span<const std::size_t> visible,
                   Real rho_d) {
  check_ratio(rho_d, "rho_d");
  std::vector<std::size_t> rank(visible.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    const Real sa = scores[visible[a]], sb = scores[visible[b]];
    if (sa != sb) return sa > sb;
    return visible[a] < visible[b];
  });
  Mask m(visible.size(), 0);
  const std::size_t hide = mask_count(rho_d, visible.size());
  for (std::size_t i = 0; i < hide; ++i) m[rank[i]] = 1;
  return m;
}

std::vector<std::size_t> visible_indices(const Mask& enc) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < enc.size(); ++i)
    if (!enc[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> MaskSet::kept(std::size_t view) const {
  std::vector<std::size_t> out;
  const auto& vis = visible[view];
  for (std::size_t i = 0; i < vis.size(); ++i)
    if (dec.size() <= view || !dec[view][i]) out.push_back(vis[i]);
  return out;
}

MaskSet make_encoder_masks(std::size_t views, std::size_t n_p, Real rho_e, std::uint64_t seed) {
  MaskSet m;
  m.rho_e = rho_e;
  for (std::size_t v = 0; v < views; ++v) {
    m.enc.push_back(random_encoder_mask(n_p, rho_e, seed, v));
    m.visible.push_back(visible_indices(m.enc.back()));
  }
  return m;
}

void apply_geometry_masks(MaskSet& m, std::span<const std::vector<Real>> scores, Real rho_d) {
  if (scores.size() != m.visible.size()) {
    throw Error(ErrorCode::kShapeError, "one score vector per view required");
  }
  m.rho_d = rho_d;
  m.dec.clear();
  for (std::size_t v = 0; v < scores.size(); ++v) {
    m.dec.push_back(geometry_mask(scores[v], m.visible[v], rho_d));
  }
}

}  // namespace dualsplat
