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

#include <random>
#include <sstream>

#include "dualsplat/error.hpp"
#include "dualsplat/gaussian_field.hpp"
#include "dualsplat/grad_check.hpp"

namespace dualsplat {
namespace {

GeometricFeature feature_with_rotation() {
  GeometricFeature eps{};
  eps[1] = 1.0;
  return eps;
}

TEST(UnpackGeometricFeature, ZeroFeatureWithUnitRotation) {
  const ActivatedFeature a = unpack_geometric_feature(feature_with_rotation());
  EXPECT_DOUBLE_EQ(a.sigma, 0.5);
  EXPECT_EQ(a.r, Vec4(1, 0, 0, 0));
  EXPECT_EQ(a.s, Vec3(1, 1, 1));
  EXPECT_EQ(a.color, Vec3(0.5, 0.5, 0.5));
}

TEST(UnpackGeometricFeature, ZeroRotationIsDegenerate) {
  const GeometricFeature eps{};
  try {
    unpack_geometric_feature(eps);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateRotation);
  }
}

TEST(UnpackGeometricFeature, OpacitySaturates) {
  GeometricFeature eps = feature_with_rotation();
  eps[0] = 20.0;
  EXPECT_NEAR(unpack_geometric_feature(eps).sigma, 1.0, 1e-8);
}

TEST(UnpackGeometricFeature, RandomRawInputsRespectBounds) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 5.0);
  for (int i = 0; i < 2000; ++i) {
    GeometricFeature eps;
    for (auto& v : eps) v = n(rng);
    const ActivatedFeature a = unpack_geometric_feature(eps);
    EXPECT_GE(a.sigma, 0.0);
    EXPECT_LE(a.sigma, 1.0);
    EXPECT_NEAR(a.r.norm(), 1.0, 1e-6);
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(a.s[c], kMinScale);
      EXPECT_LE(a.s[c], kDefaultMaxScale);
      EXPECT_GE(a.color[c], 0.0);
      EXPECT_LE(a.color[c], 1.0);
    }
  }
}

std::vector<OffsetRecord> zero_records(std::size_t n) {
  std::vector<OffsetRecord> r(n);
  for (auto& rec : r) rec.attrs = feature_with_rotation();
  return r;
}

TEST(Expansion, CardinalityChain) {
  std::vector<AnchorGaussian> anchors(256);
  const auto sem = expand_anchors_to_semantic(anchors, zero_records(2560));
  EXPECT_EQ(sem.size(), 2560u);
  const auto app = expand_semantic_to_appearance(sem, zero_records(25600));
  EXPECT_EQ(app.size(), 25600u);
  for (const auto& g : app) EXPECT_EQ(g.level, GaussianLevel::kAppearance);
  for (const auto& g : sem) EXPECT_EQ(g.level, GaussianLevel::kSemantic);
}

TEST(Expansion, FanOutMismatch) {
  std::vector<AnchorGaussian> anchors(2);
  try {
    expand_anchors_to_semantic(anchors, zero_records(19));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFanOutMismatch);
  }
}

TEST(Expansion, OffsetsAddToAnchorCenter) {
  std::vector<AnchorGaussian> anchors(1);
  auto recs = zero_records(10);
  auto origin = expand_anchors_to_semantic(anchors, recs);
  for (const auto& g : origin) EXPECT_EQ(g.center, Vec3::Zero());
  anchors[0].mu = Vec3(1, 2, 3);
  recs[0].delta = Vec3(0.1, 0, 0);
  const auto shifted = expand_anchors_to_semantic(anchors, recs);
  EXPECT_NEAR((shifted[0].center - Vec3(1.1, 2, 3)).norm(), 0.0, 1e-15);
  const auto app = expand_semantic_to_appearance(shifted, zero_records(100));
  for (std::size_t i = 0; i < app.size(); ++i) EXPECT_EQ(app[i].center, shifted[i / 10].center);
}

TEST(Expansion, TranslationEquivariant) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<AnchorGaussian> anchors(3);
  for (auto& a : anchors) a.mu = Vec3(n(rng), n(rng), n(rng));
  auto recs = zero_records(30);
  for (auto& r : recs) {
    r.delta = Vec3(n(rng), n(rng), n(rng)) * 0.1;
    for (auto& v : r.attrs) v = n(rng);
    for (auto& v : r.gamma) v = n(rng);
  }
  const Vec3 shift(0.25, -1.5, 3.0);
  auto moved = anchors;
  for (auto& a : moved) a.mu += shift;
  const auto a = expand_anchors_to_semantic(anchors, recs);
  const auto b = expand_anchors_to_semantic(moved, recs);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_LT((b[i].center - a[i].center - shift).norm(), 1e-12);
    EXPECT_EQ(a[i].sigma, b[i].sigma);
    EXPECT_EQ(a[i].r, b[i].r);
    EXPECT_EQ(a[i].s, b[i].s);
    EXPECT_EQ(a[i].color, b[i].color);
    EXPECT_EQ(a[i].gamma, b[i].gamma);
  }
}

TEST(Expansion, CopyParentSemantics) {
  std::vector<AnchorGaussian> anchors(1);
  auto recs = zero_records(10);
  recs[3].gamma[7] = 2.5;
  const auto sem = expand_anchors_to_semantic(anchors, recs);
  auto fine = zero_records(100);
  fine[35].gamma[7] = -1.0;
  const auto fresh = expand_semantic_to_appearance(sem, fine, FineSemantics::kFresh);
  const auto copied = expand_semantic_to_appearance(sem, fine, FineSemantics::kCopyParent);
  EXPECT_EQ(fresh[35].gamma[7], -1.0);
  EXPECT_EQ(copied[35].gamma[7], 2.5);
}

TEST(ExpandLevel, TensorPathMatchesValuePath) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<AnchorGaussian> anchors(2);
  for (auto& a : anchors) a.mu = Vec3(n(rng), n(rng), n(rng));
  auto recs = zero_records(20);
  std::vector<Real> centers, deltas, attrs, sems;
  for (auto& a : anchors) centers.insert(centers.end(), {a.mu.x(), a.mu.y(), a.mu.z()});
  for (auto& r : recs) {
    r.delta = Vec3(n(rng), n(rng), n(rng)) * 0.1;
    for (auto& v : r.attrs) v = n(rng);
    for (auto& v : r.gamma) v = n(rng);
    deltas.insert(deltas.end(), r.delta.data(), r.delta.data() + 3);
    attrs.insert(attrs.end(), r.attrs.begin(), r.attrs.end());
    sems.insert(sems.end(), r.gamma.begin(), r.gamma.end());
  }
  const auto values = expand_anchors_to_semantic(anchors, recs);
  const GaussianTensors t =
      expand_level(Tensor({2, 3}, centers), Tensor({20, 3}, deltas),
                   Tensor({20, kGeometricFeatureDims}, attrs), Tensor({20, kSemanticDims}, sems));
  const auto back = to_render_gaussians(t, GaussianLevel::kSemantic);
  ASSERT_EQ(back.size(), values.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_LT((back[i].center - values[i].center).norm(), 1e-12);
    EXPECT_NEAR(back[i].sigma, values[i].sigma, 1e-12);
    EXPECT_LT((back[i].r - values[i].r).norm(), 1e-12);
    EXPECT_LT((back[i].s - values[i].s).norm(), 1e-12);
    EXPECT_LT((back[i].color - values[i].color).norm(), 1e-12);
  }
}

TEST(ExpandLevel, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 0.5);
  auto rnd = [&](Shape s) {
    std::vector<Real> v(s.size());
    for (auto& x : v) x = n(rng);
    return Tensor(s, v, true);
  };
  Tensor parents = rnd({1, 3});
  Tensor deltas = rnd({10, 3});
  Tensor attrs = rnd({10, kGeometricFeatureDims});
  Tensor sems = rnd({10, kSemanticDims});
  Tensor w3 = rnd({10, 3}), w4 = rnd({10, 4}), w1 = rnd({10, 1}), w64 = rnd({10, kSemanticDims});
  auto f = [&] {
    const GaussianTensors g = expand_level(parents, deltas, attrs, sems);
    return add(add(sum(mul(g.centers, w3)), sum(mul(g.rotation, w4))),
               add(add(sum(mul(g.scales, w3)), sum(mul(g.opacity, w1))),
                   add(sum(mul(g.colors, w3)), sum(mul(g.semantics, w64)))));
  };
  EXPECT_LT(grad_check(f, {parents, deltas, attrs, sems}).max_rel_error, 1e-4);
}

TEST(GaussianText, RoundTrip) {
  RenderGaussian g;
  g.center = Vec3(0.125, -2.5, 3.0);
  g.color = Vec3(0.25, 0.5, 0.75);
  g.sigma = 0.375;
  g.r = Vec4(0.5, 0.5, 0.5, 0.5);
  g.s = Vec3(0.01, 0.02, 0.03);
  g.gamma[5] = 1.5;
  g.level = GaussianLevel::kAppearance;
  std::ostringstream os;
  write_gaussian_line(os, g);
  const std::string line = os.str();
  EXPECT_EQ(line.rfind("g appearance ", 0), 0u);
  const RenderGaussian back = parse_gaussian_line(line);
  EXPECT_EQ(back.level, g.level);
  EXPECT_LT((back.center - g.center).norm(), 1e-9);
  EXPECT_NEAR(back.sigma, g.sigma, 1e-9);
  EXPECT_NEAR(back.gamma[5], 1.5, 1e-9);
}

}  // namespace
}  // namespace dualsplat
