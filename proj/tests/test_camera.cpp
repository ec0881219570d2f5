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

#include <cmath>
#include <numbers>
#include <random>

#include "dualsplat/camera.hpp"
#include "dualsplat/error.hpp"
#include "dualsplat/grad_check.hpp"
#include "support/oracle.hpp"

namespace dualsplat {
namespace {

const ImageSize k128{128, 128};

CameraParams identity_cam(Real f = 100.0) {
  return CameraParams(Vec4(1, 0, 0, 0), Vec3::Zero(), f, f);
}

TEST(ProjectPoint, OpticalAxisHitsPrincipalPoint) {
  const PixelCoord p = project_point(identity_cam(), k128, Vec3(0, 0, 1));
  EXPECT_TRUE(p.valid);
  EXPECT_DOUBLE_EQ(p.u, 63.5);
  EXPECT_DOUBLE_EQ(p.v, 63.5);
}

TEST(ProjectPoint, LateralOffset) {
  const PixelCoord p = project_point(identity_cam(), k128, Vec3(0.1, 0, 1));
  EXPECT_NEAR(p.u, 100.0 * 0.1 + 63.5, 1e-12);
  EXPECT_NEAR(p.v, 63.5, 1e-12);
}

TEST(ProjectPoint, BehindCameraInvalid) {
  EXPECT_FALSE(project_point(identity_cam(), k128, Vec3(0, 0, -1)).valid);
  EXPECT_FALSE(project_point(identity_cam(), k128, Vec3(0, 0, 1e-5)).valid);
}

TEST(ProjectPoint, RoundTripThroughUnproject) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const CameraParams cam(testing::random_unit_quaternion(rng), Vec3(d(rng), d(rng), d(rng)),
                           80 + 40 * (d(rng) + 1), 80 + 40 * (d(rng) + 1));
    const Vec3 xc(d(rng), d(rng), 1.5 + d(rng));
    const Vec3 world = cam.rotation().transpose() * (xc - cam.t());
    const PixelCoord p = project_point(cam, k128, world);
    ASSERT_TRUE(p.valid);
    const Vec3 back = unproject(cam, k128, p.u, p.v, xc.z());
    EXPECT_LT((back - world).norm(), 1e-5);
  }
}

TEST(CameraParams, NormalizesAndValidates) {
  const CameraParams c(Vec4(2, 0, 0, 0), Vec3::Zero(), 1, 1);
  EXPECT_NEAR(c.q().norm(), 1.0, 1e-12);
  EXPECT_THROW(CameraParams(Vec4::Zero(), Vec3::Zero(), 1, 1), Error);
  EXPECT_THROW(CameraParams(Vec4(1, 0, 0, 0), Vec3::Zero(), 0, 1), Error);
  EXPECT_THROW(CameraParams(Vec4(1, 0, 0, 0), Vec3::Zero(), 1, -2), Error);
}

TEST(CameraParams, ArrayRoundTrip) {
  const CameraParams c(Vec4(0.5, 0.5, 0.5, 0.5), Vec3(1, 2, 3), 90, 95);
  const auto a = c.to_array();
  const CameraParams d = CameraParams::from_array(a);
  EXPECT_EQ(a, d.to_array());
}

Image tiny_image() {
  Image img(2, 2, 1);
  img.at(0, 0) = 0;
  img.at(0, 1) = 1;
  img.at(1, 0) = 2;
  img.at(1, 1) = 3;
  return img;
}

TEST(BilinearSample, GridPoint) {
  EXPECT_DOUBLE_EQ(bilinear_sample(tiny_image(), {0, 0, true})[0], 0.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(tiny_image(), {1, 1, true})[0], 3.0);
}

TEST(BilinearSample, Center) {
  EXPECT_DOUBLE_EQ(bilinear_sample(tiny_image(), {0.5, 0.5, true})[0], 1.5);
}

TEST(BilinearSample, ClampsToEdge) {
  EXPECT_DOUBLE_EQ(bilinear_sample(tiny_image(), {-1, 0, true})[0], 0.0);
  EXPECT_DOUBLE_EQ(bilinear_sample(tiny_image(), {5, 7, true})[0], 3.0);
}

TEST(BilinearSample, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uv(0.3, 14.7);
  const Image base = testing::random_smooth_image(rng, 16, 16, 3);
  Real worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    // Keep clear of integer coordinates where the sampler has kinks.
    PixelCoord at{uv(rng), uv(rng), true};
    if (std::abs(at.u - std::round(at.u)) < 0.01 || std::abs(at.v - std::round(at.v)) < 0.01)
      continue;
    const std::vector<Real> up{0.3, -1.2, 0.7};
    auto f = [&](const Image& img, PixelCoord p) {
      const auto s = bilinear_sample(img, p);
      return up[0] * s[0] + up[1] * s[1] + up[2] * s[2];
    };
    std::vector<Real> img_grad(base.data.size(), 0.0);
    const BilinearGrad g = bilinear_sample_backward(base, at, up, img_grad);
    const Real h = 1e-5;
    auto rel = [](Real a, Real n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
    const Real nu = (f(base, {at.u + h, at.v, true}) - f(base, {at.u - h, at.v, true})) / (2 * h);
    const Real nv = (f(base, {at.u, at.v + h, true}) - f(base, {at.u, at.v - h, true})) / (2 * h);
    worst = std::max({worst, rel(g.du, nu), rel(g.dv, nv)});
    for (std::size_t i = 0; i < base.data.size(); i += 7) {
      Image a = base, b = base;
      a.data[i] += h;
      b.data[i] -= h;
      worst = std::max(worst, rel(img_grad[i], (f(a, at) - f(b, at)) / (2 * h)));
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(BilinearGather, TapeGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  const Image img = testing::random_smooth_image(rng, 6, 7, 2);
  Tensor image({42, 2}, img.data, true);
  std::uniform_real_distribution<double> uv(0.2, 5.3);
  std::vector<Real> c;
  for (int i = 0; i < 5; ++i) {
    c.push_back(uv(rng) + 0.013);
    c.push_back(std::min(uv(rng), 4.7) + 0.017);
  }
  Tensor coords({5, 2}, c, true);
  Tensor w({5, 2}, {0.3, -0.4, 1.0, 0.2, -0.7, 0.5, 0.9, -1.1, 0.25, 0.6});
  const auto r = grad_check(
      [&] { return sum(mul(bilinear_gather(image, {7, 6}, coords), w)); }, {image, coords});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

TEST(CanonicalizePoses, SingleCameraBecomesIdentity) {
  const CameraParams c(Vec4(0.3, 0.1, -0.4, 0.8), Vec3(1, -2, 3), 70, 80);
  const auto out = canonicalize_poses(std::vector<CameraParams>{c});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].q(), Vec4(1, 0, 0, 0));
  EXPECT_EQ(out[0].t(), Vec3::Zero());
  EXPECT_EQ(out[0].fx(), 70);
  EXPECT_EQ(out[0].fy(), 80);
}

TEST(CanonicalizePoses, IdenticalCamerasBothIdentity) {
  const CameraParams c(Vec4(0.3, 0.1, -0.4, 0.8), Vec3(1, -2, 3), 70, 80);
  const auto out = canonicalize_poses(std::vector<CameraParams>{c, c});
  for (const auto& o : out) {
    EXPECT_LT((o.rotation() - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LT(o.t().norm(), 1e-12);
  }
}

Eigen::Matrix4d extrinsic(const CameraParams& c) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = c.rotation();
  m.topRightCorner<3, 1>() = c.t();
  return m;
}

TEST(CanonicalizePoses, PreservesRelativePoseAndIsIdempotent) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<CameraParams> cams;
  for (int i = 0; i < 5; ++i)
    cams.emplace_back(testing::random_unit_quaternion(rng), Vec3(d(rng), d(rng), d(rng)), 100, 100);
  const auto out = canonicalize_poses(cams);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    for (std::size_t j = 0; j < cams.size(); ++j) {
      // Relative pose A^-1 B with A, B camera-to-world.
      const Eigen::Matrix4d before = extrinsic(cams[i]) * extrinsic(cams[j]).inverse();
      const Eigen::Matrix4d after = extrinsic(out[i]) * extrinsic(out[j]).inverse();
      EXPECT_LT((before - after).norm(), 1e-9);
    }
  }
  const auto twice = canonicalize_poses(out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    EXPECT_LT((twice[i].q() - out[i].q()).norm(), 1e-12);
    EXPECT_LT((twice[i].t() - out[i].t()).norm(), 1e-12);
  }
}

TEST(RelativeRotationError, Examples) {
  const CameraParams a = identity_cam();
  const Real c45 = std::cos(std::numbers::pi / 4);
  const CameraParams b(Vec4(c45, 0, 0, c45), Vec3::Zero(), 100, 100);
  EXPECT_NEAR(relative_rotation_error(a, a), 0.0, 1e-12);
  EXPECT_NEAR(relative_rotation_error(a, b), 90.0, 1e-9);
  const CameraParams neg(-b.q(), Vec3::Zero(), 100, 100);
  EXPECT_NEAR(relative_rotation_error(b, neg), 0.0, 1e-9);
}

TEST(RelativeRotationError, SymmetricAndTriangleInequality) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const CameraParams a(testing::random_unit_quaternion(rng), Vec3::Zero(), 1, 1);
    const CameraParams b(testing::random_unit_quaternion(rng), Vec3::Zero(), 1, 1);
    const CameraParams c(testing::random_unit_quaternion(rng), Vec3::Zero(), 1, 1);
    const Real ab = relative_rotation_error(a, b);
    EXPECT_NEAR(ab, relative_rotation_error(b, a), 1e-9);
    EXPECT_LE(relative_rotation_error(a, c), ab + relative_rotation_error(b, c) + 1e-9);
  }
}

TEST(CameraTensors, ComposeZeroDeltaIsExactIdentity) {
  const CameraParams c(Vec4(0.3, 0.1, -0.4, 0.8), Vec3(1, -2, 3), 70, 80);
  const Tensor cams = cameras_to_tensor(std::vector<CameraParams>{c});
  const Tensor out = compose_camera_delta(cams, Tensor::zeros({1, kCameraDims}));
  for (std::size_t i = 0; i < kCameraDims; ++i) EXPECT_EQ(out.values()[i], cams.values()[i]);
}

TEST(CameraTensors, ProjectPointsGradients) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  const CameraParams c(testing::random_unit_quaternion(rng), Vec3(0.1, -0.2, 0.3), 90, 85);
  const auto raw = c.to_array();
  Tensor cam({1, kCameraDims}, std::vector<Real>(raw.begin(), raw.end()), true);
  std::vector<Real> pts;
  for (int i = 0; i < 6; ++i) {
    const Vec3 xc(d(rng), d(rng), 2.0 + d(rng));
    const Vec3 w = c.rotation().transpose() * (xc - c.t());
    pts.insert(pts.end(), {w.x(), w.y(), w.z()});
  }
  Tensor points({6, 3}, pts, true);
  Tensor wts({6, 2}, {0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8, -0.9, 1.0, 0.15, -0.25});
  const auto r = grad_check(
      [&] { return sum(mul(project_points(cam, points, {32, 24}).coords, wts)); }, {cam, points});
  EXPECT_LT(r.max_rel_error, 1e-4);
}

}  // namespace
}  // namespace dualsplat
