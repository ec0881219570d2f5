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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "dualsplat/error.hpp"
#include "dualsplat/grad_check.hpp"
#include "dualsplat/network.hpp"
#include "dualsplat/rasterizer.hpp"
#include "support/oracle.hpp"

namespace dualsplat {
namespace {

ModelConfig micro_config() {
  ModelConfig c;
  c.image_height = 16;
  c.image_width = 16;
  c.patch = 8;
  c.dim = 16;
  c.heads = 2;
  c.enc_depth = 1;
  c.dec_depth = 1;
  c.ffn_hidden = 32;
  c.head_hidden = 16;
  c.views = 2;
  c.gaussians_per_view = 2;
  c.focal_prior = 16.0;
  c.scene_center = Vec3(0.0, 0.0, 2.5);
  c.seed = 3;
  return c;
}

std::vector<Image> random_views(const ModelConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Image> out;
  for (int v = 0; v < c.views; ++v)
    out.push_back(testing::random_smooth_image(rng, c.image_height, c.image_width, 3));
  return out;
}

void zero_heads(ModelParams& p) {
  for (auto& [name, t] : p.named) {
    if (name.rfind("head.", 0) == 0 && name.ends_with(".w"))
      std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
  }
}

Tensor find(const ModelParams& p, const std::string& name) {
  for (const auto& [n, t] : p.named)
    if (n == name) return t;
  throw std::runtime_error("no parameter " + name);
}

TEST(Network, EncoderPreservesTokenCounts) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  const auto images = random_views(c, 1);
  const TokenGrid grid = patchify(images, c.patch);
  const MaskSet masks = make_encoder_masks(images.size(), grid.patches(), 0.5, 9);
  const EncodedState s = encode(p, c, grid, masks);
  std::size_t vis_in = 0, vis_out = 0;
  for (std::size_t v = 0; v < images.size(); ++v) {
    vis_in += masks.visible[v].size();
    vis_out += s.y_vis[v].rows();
    EXPECT_EQ(s.y_vis[v].cols(), static_cast<std::size_t>(c.dim));
  }
  EXPECT_EQ(vis_in, vis_out);
  EXPECT_EQ(s.cam.rows(), 2u);
  EXPECT_EQ(s.gauss.rows(), 2u * 2u);
}

TEST(Network, EncodeRejectsMismatchedGrid) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  std::mt19937_64 rng(2);
  std::vector<Image> three;
  for (int v = 0; v < 3; ++v) three.push_back(testing::random_smooth_image(rng, 16, 16, 3));
  const TokenGrid grid = patchify(three, c.patch);
  const MaskSet masks = make_encoder_masks(3, grid.patches(), 0.0, 0);
  EXPECT_THROW(
      {
        try {
          encode(p, c, grid, masks);
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kShapeError);
          throw;
        }
      },
      Error);
}

TEST(Network, ZeroResidualBranchesAreIdentity) {
  const ModelConfig c = micro_config();
  ModelParams p = init_params(c);
  for (auto& b : p.enc_blocks) {
    std::fill(b.wo.mutable_values().begin(), b.wo.mutable_values().end(), 0.0);
    std::fill(b.ff2.w.mutable_values().begin(), b.ff2.w.mutable_values().end(), 0.0);
  }
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  std::vector<Real> v(7 * 16);
  for (auto& x : v) x = d(rng);
  const Tensor x({7, 16}, v);
  const Tensor y = run_blocks(p.enc_blocks, x, c.heads);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(y.values()[i], v[i]);
}

TEST(Network, ViewPermutationPermutesOutputs) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  auto images = random_views(c, 11);
  const TokenGrid grid = patchify(images, c.patch);
  const MaskSet masks = make_encoder_masks(2, grid.patches(), 0.0, 0);
  const EncodedState a = encode(p, c, grid, masks);

  ModelParams q = init_params(c);
  auto ve = q.view_embed.mutable_values();
  for (std::size_t k = 0; k < 16; ++k) std::swap(ve[k], ve[16 + k]);
  auto ct = q.cam_tokens.mutable_values();
  for (std::size_t k = 0; k < 16; ++k) std::swap(ct[k], ct[16 + k]);
  std::swap(images[0], images[1]);
  const EncodedState b = encode(q, c, patchify(images, c.patch), masks);

  auto expect_near = [](const Tensor& x, std::size_t xr, const Tensor& y, std::size_t yr) {
    for (std::size_t k = 0; k < x.cols(); ++k)
      EXPECT_NEAR(x.at(xr, k), y.at(yr, k), 1e-10);
  };
  for (std::size_t r = 0; r < a.y_vis[0].rows(); ++r) {
    expect_near(a.y_vis[0], r, b.y_vis[1], r);
    expect_near(a.y_vis[1], r, b.y_vis[0], r);
  }
  expect_near(a.cam, 0, b.cam, 1);
  expect_near(a.cam, 1, b.cam, 0);
  for (std::size_t g = 0; g < 2; ++g) {
    expect_near(a.gauss, g, b.gauss, 2 + g);
    expect_near(a.gauss, 2 + g, b.gauss, g);
  }
}

TEST(Network, CoarseFieldCardinalityAtDefaultSize) {
  ModelConfig c;
  c.dim = 16;
  c.heads = 2;
  c.head_hidden = 16;
  const ModelParams p = init_params(c);
  const std::size_t ng = 256, views = 4;
  const Tensor gauss = Tensor::zeros({ng * views, 16});
  const Tensor cam = Tensor::zeros({views, 16});
  const CoarseOutputs co = coarse_heads(p, c, cam, gauss);
  EXPECT_EQ(co.geo.count(), 1024u);
  EXPECT_EQ(co.cameras.rows(), 4u);
  const FineOutputs fo = fine_heads(p, c, gauss);
  EXPECT_EQ(fo.anchor_centers.rows(), 1024u);
  EXPECT_EQ(fo.anchor_features.cols(), 11u);
  EXPECT_EQ(fo.anchor_semantics.cols(), 64u);
  EXPECT_EQ(fo.semantic.count(), 10240u);
  EXPECT_EQ(fo.appearance.count(), 102400u);
}

TEST(Network, ZeroHeadsGivePriorCamerasAndSoftplusZero) {
  const ModelConfig c = micro_config();
  ModelParams p = init_params(c);
  zero_heads(p);
  const auto out = forward(p, c, random_views(c, 4), {});
  for (std::size_t v = 0; v < 2; ++v) {
    const Real expect[9] = {1, 0, 0, 0, 0, 0, 0, c.focal_prior, c.focal_prior};
    for (std::size_t k = 0; k < 9; ++k) {
      EXPECT_EQ(out.coarse.cameras.at(v, k), expect[k]);
      EXPECT_EQ(out.point_camera.cameras.at(v, k), out.coarse.cameras.at(v, k));
    }
  }
  for (Real beta : out.coarse.geo.importance.values()) EXPECT_NEAR(beta, 0.6931471805599453, 1e-12);
  for (const auto& u : out.point_camera.confidence) {
    for (Real x : u.values()) EXPECT_NEAR(x, 1.6931471805599453, 1e-12);
  }
}

TEST(Network, ZeroHeadsCollapseChildrenOntoParents) {
  const ModelConfig c = micro_config();
  ModelParams p = init_params(c);
  zero_heads(p);
  const auto out = forward(p, c, random_views(c, 4), {});
  const auto& f = out.fine;
  for (std::size_t i = 0; i < f.semantic.count(); ++i)
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_EQ(f.semantic.centers.at(i, k), f.anchor_centers.at(i / 10, k));
  for (std::size_t i = 0; i < f.appearance.count(); ++i)
    for (std::size_t k = 0; k < 3; ++k)
      EXPECT_EQ(f.appearance.centers.at(i, k), f.semantic.centers.at(i / 10, k));
}

TEST(Network, FinalCameraHeadStartsAsIdentityDelta) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  const auto out = forward(p, c, random_views(c, 8), {});
  for (std::size_t i = 0; i < out.coarse.cameras.values().size(); ++i)
    EXPECT_EQ(out.point_camera.cameras.values()[i], out.coarse.cameras.values()[i]);
}

TEST(Network, DecoderRestoresFullGrid) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  const auto images = random_views(c, 6);
  for (Real rho_e : {0.0, 0.25, 0.5, 0.75}) {
    for (Real rho_d : {0.0, 0.5, 0.75}) {
      ForwardOptions o;
      o.rho_e = rho_e;
      o.rho_d = rho_d;
      const auto out = forward(p, c, images, o);
      EXPECT_EQ(out.decoded.grid.rows(), 2u * c.patches());
      std::size_t hidden = 0;
      for (std::size_t v = 0; v < 2; ++v) hidden += c.patches() - out.masks.kept(v).size();
      EXPECT_EQ(out.decoded.mask_slots, hidden);
      if (rho_e == 0.0 && rho_d == 0.0) EXPECT_EQ(out.decoded.mask_slots, 0u);
    }
  }
}

TEST(Network, PointMapShapes) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  const auto out = forward(p, c, random_views(c, 6), {});
  ASSERT_EQ(out.point_camera.points.size(), 2u);
  for (std::size_t v = 0; v < 2; ++v) {
    EXPECT_EQ(out.point_camera.points[v].rows(), 256u);
    EXPECT_EQ(out.point_camera.points[v].cols(), 3u);
    EXPECT_EQ(out.point_camera.confidence[v].rows(), 256u);
    for (Real u : out.point_camera.confidence[v].values()) EXPECT_GE(u, 1.0);
  }
}

TEST(Network, PointHeadPixelOrder) {
  // A point-head bias that encodes the sub-pixel index must come back
  // unpatched in row-major pixel order.
  const ModelConfig c = micro_config();
  ModelParams p = init_params(c);
  zero_heads(p);
  auto b = find(p, "head.point.b").mutable_values();
  for (std::size_t s = 0; s < 64; ++s) b[s * 4] = static_cast<Real>(s);
  const Tensor grid = Tensor::zeros({2 * c.patches(), 16});
  const auto out = point_and_camera_heads(p, c, grid, Tensor::zeros({2, 16}),
                                          Tensor::zeros({2, 9}));
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      EXPECT_EQ(out.points[0].at(static_cast<std::size_t>(y) * 16 + x, 0),
                static_cast<Real>((y % 8) * 8 + x % 8));
}

TEST(Network, DoubledWidthKeepsContracts) {
  ModelConfig c = micro_config();
  c.dim = 32;
  const ModelParams p = init_params(c);
  const auto out = forward(p, c, random_views(c, 6), {});
  EXPECT_EQ(out.decoded.grid.cols(), 32u);
  EXPECT_EQ(out.fine.appearance.count(), 2u * 2u * 100u);
  EXPECT_EQ(out.point_camera.points[1].rows(), 256u);
}

TEST(Network, DeterministicForward) {
  const ModelConfig c = micro_config();
  const auto images = random_views(c, 6);
  ForwardOptions o;
  o.mask_seed = 17;
  const auto a = forward(init_params(c), c, images, o);
  const auto b = forward(init_params(c), c, images, o);
  EXPECT_EQ(a.fine.appearance.centers.values().size(), b.fine.appearance.centers.values().size());
  EXPECT_TRUE(std::equal(a.fine.appearance.centers.values().begin(),
                         a.fine.appearance.centers.values().end(),
                         b.fine.appearance.centers.values().begin()));
  EXPECT_TRUE(std::equal(a.point_camera.points[0].values().begin(),
                         a.point_camera.points[0].values().end(),
                         b.point_camera.points[0].values().begin()));
  EXPECT_EQ(a.masks.dec, b.masks.dec);
}

// Scalar touching every head and a render of the appearance field.
Tensor probe_loss(const ModelParams& p, const ModelConfig& c, std::span<const Image> images) {
  ForwardOptions o;
  o.mask_seed = 5;
  const auto out = forward(p, c, images, o);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto project = [&](const Tensor& t) {
    std::vector<Real> w(t.values().size());
    for (auto& x : w) x = u(rng);
    return sum(mul(t, Tensor(t.shape(), w)));
  };
  Tensor total = project(out.coarse.cameras);
  const GaussianTensors* fields[] = {&out.coarse.geo, &out.fine.semantic, &out.fine.appearance};
  for (const auto* f : fields) {
    total = add(total, project(f->centers));
    total = add(total, project(f->opacity));
    total = add(total, project(f->rotation));
    total = add(total, project(f->scales));
    if (f->colors.defined()) total = add(total, project(f->colors));
    if (f->semantics.defined()) total = add(total, scale(project(f->semantics), 0.1));
  }
  total = add(total, project(out.coarse.geo.importance));
  total = add(total, project(out.fine.anchor_centers));
  for (std::size_t v = 0; v < out.point_camera.points.size(); ++v) {
    total = add(total, scale(project(out.point_camera.points[v]), 0.05));
    total = add(total, scale(project(out.point_camera.confidence[v]), 0.05));
  }
  total = add(total, project(out.point_camera.cameras));
  RenderOptions ro;
  ro.workers = 1;
  const auto r = render_tensors(slice_rows(out.point_camera.cameras, 0, 1), out.fine.appearance,
                                c.image_size(), RenderChannels{true, true, false, true}, ro);
  total = add(total, project(r.rgb));
  total = add(total, scale(project(r.semantics), 0.1));
  total = add(total, scale(project(r.depth), 0.1));
  return total;
}

TEST(Network, MicroConfigGradientsMatchFiniteDifferences) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  const auto images = random_views(c, 21);

  const Tensor loss = probe_loss(p, c, images);
  backward(loss);
  for (const auto& [name, t] : p.named) {
    ASSERT_TRUE(t.has_grad()) << name;
    for (Real g : t.grad()) ASSERT_TRUE(std::isfinite(g)) << name;
  }

  // The image-bounds cull makes the render piecewise smooth; a step of 1e-5
  // already straddles cull events for a few hundred splats, 1e-6 does not.
  GradCheckOptions go;
  go.step = 1e-6;
  go.floor = 1e-5;
  go.max_coords_per_param = 6;
  go.seed = 8;
  const auto res = grad_check([&] { return probe_loss(p, c, images); }, p.tensors(), go);
  EXPECT_LT(res.max_rel_error, 1e-3) << p.named[res.param].first << "[" << res.index
                                     << "] analytic " << res.analytic << " numeric "
                                     << res.numeric;
  EXPECT_GT(res.checked, 100u);
}

TEST(Network, CheckpointRoundTrip) {
  const ModelConfig c = micro_config();
  const ModelParams p = init_params(c);
  std::stringstream ss;
  save_checkpoint(ss, p, "dim = 16\n");
  ModelConfig other = c;
  other.seed = 77;
  ModelParams q = init_params(other);
  EXPECT_EQ(load_checkpoint(ss, q), "dim = 16\n");
  for (std::size_t i = 0; i < p.named.size(); ++i) {
    const auto a = p.named[i].second.values();
    const auto b = q.named[i].second.values();
    for (std::size_t k = 0; k < a.size(); ++k)
      EXPECT_EQ(b[k], static_cast<Real>(static_cast<float>(a[k])));
  }
}

TEST(Network, CheckpointRejectsGarbageAndMismatch) {
  const ModelConfig c = micro_config();
  ModelParams p = init_params(c);
  std::stringstream bad("NOTACKPT");
  EXPECT_THROW(load_checkpoint(bad, p), Error);

  ModelConfig wide = c;
  wide.dim = 32;
  std::stringstream ss;
  save_checkpoint(ss, init_params(wide), "");
  EXPECT_THROW(load_checkpoint(ss, p), Error);
}

TEST(Network, RejectsBadConfig) {
  ModelConfig c = micro_config();
  c.dim = 15;
  EXPECT_THROW(init_params(c), Error);
  c = micro_config();
  c.image_width = 20;
  EXPECT_THROW(init_params(c), Error);
}

}  // namespace
}  // namespace dualsplat
