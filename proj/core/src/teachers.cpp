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


#include "dualsplat/teachers.hpp"

#include <Eigen/QR>

#include <cmath>
#include <numbers>
#include <random>

#include "dualsplat/error.hpp"
#include "dualsplat/gaussian_field.hpp"

namespace dualsplat {

namespace {

Real gaussian(std::mt19937_64& rng) {
  // Box-Muller on portable uniforms.
  const Real u1 = (static_cast<Real>(rng() >> 11) + 1.0) * 0x1.0p-53;
  const Real u2 = static_cast<Real>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Real uniform(std::mt19937_64& rng, Real lo, Real hi) {
  return lo + (hi - lo) * static_cast<Real>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

std::vector<std::vector<Real>> make_class_codes(int count, std::uint64_t seed) {
  const auto d = static_cast<Eigen::Index>(kSemanticDims);
  if (count < 1 || count > d) throw Error(ErrorCode::kConfigError, "class code count out of range");
  std::mt19937_64 rng(seed ^ 0xc1a55c0de5ULL);
  Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> g(d, count);
  for (Eigen::Index j = 0; j < count; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = gaussian(rng);
  const Eigen::HouseholderQR<Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>> qr(g);
  const Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic> q =
      qr.householderQ() * Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>::Identity(d, count);
  std::vector<std::vector<Real>> out(static_cast<std::size_t>(count), std::vector<Real>(kSemanticDims));
  for (Eigen::Index j = 0; j < count; ++j)
    for (Eigen::Index i = 0; i < d; ++i) out[j][i] = q(i, j);
  return out;
}

OracleTeachers make_teachers(const SyntheticScene& scene, const PoseNoise& noise) {
  OracleTeachers t;
  const int k = scene.config.classes;
  t.class_codes = make_class_codes(k + 1, scene.seed);
  std::mt19937_64 rng(noise.seed);
  const ImageSize size = scene.size();
  for (std::size_t v : scene.source) {
    CameraParams cam = scene.cameras[v];
    if (noise.rotation_degrees > 0 || noise.translation > 0) {
      const Vec3 axis = Vec3(gaussian(rng), gaussian(rng), gaussian(rng)).normalized();
      const Real half = 0.5 * noise.rotation_degrees * std::numbers::pi / 180.0;
      const Vec4 dq(std::cos(half), std::sin(half) * axis.x(), std::sin(half) * axis.y(),
                    std::sin(half) * axis.z());
      const Vec3 dt(uniform(rng, -noise.translation, noise.translation),
                    uniform(rng, -noise.translation, noise.translation),
                    uniform(rng, -noise.translation, noise.translation));
      cam = CameraParams(quaternion_multiply(dq, cam.q()), cam.t() + dt, cam.fx(), cam.fy());
    }
    t.cameras.push_back(cam);

    Image pts(size.height, size.width, 3);
    std::vector<std::uint8_t> valid(size.pixels(), 0);
    Image feat(size.height, size.width, static_cast<int>(kSemanticDims));
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * size.width + x;
        const Real z = scene.depth[v].at(y, x);
        if (z > 0) {
          const Vec3 w = unproject(cam, size, x, y, z);
          for (int c = 0; c < 3; ++c) pts.at(y, x, c) = w[c];
          valid[p] = 1;
        }
        const auto& code = t.class_codes[static_cast<std::size_t>(scene.labels[v][p])];
        for (std::size_t c = 0; c < kSemanticDims; ++c) feat.at(y, x, static_cast<int>(c)) = code[c];
      }
    }
    t.points.push_back(std::move(pts));
    t.valid.push_back(std::move(valid));
    t.confidence.emplace_back(size.height, size.width, 1, 1.0);
    t.features.push_back(std::move(feat));
  }
  return t;
}

OracleTeachers canonicalize(const OracleTeachers& teachers) {
  OracleTeachers out = teachers;
  if (teachers.cameras.empty()) return out;
  const CameraParams& ref = teachers.cameras[0];
  out.cameras = canonicalize_poses(teachers.cameras);
  for (auto& img : out.points) {
    for (std::size_t p = 0; p < img.pixels(); ++p) {
      Real* px = &img.data[p * 3];
      const Vec3 c = ref.to_camera(Vec3(px[0], px[1], px[2]));
      for (int k = 0; k < 3; ++k) px[k] = c[k];
    }
  }
  return out;
}

}  // namespace dualsplat
