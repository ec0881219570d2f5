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

// Pinhole cameras in a 9-scalar encoding: unit quaternion (world-to-camera
// rotation, w first), translation, and focal lengths. The principal point is
// not stored; it is always the image center ((W-1)/2, (H-1)/2) under the
// pixel-center convention (pixel (0,0) is centered at coordinate (0,0)).

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "dualsplat/autodiff.hpp"
#include "dualsplat/image.hpp"

namespace dualsplat {

using Vec3 = Eigen::Matrix<Real, 3, 1>;
using Vec4 = Eigen::Matrix<Real, 4, 1>;
using Mat3 = Eigen::Matrix<Real, 3, 3>;

inline constexpr Real kMinDepth = 1e-4;
inline constexpr std::size_t kCameraDims = 9;

class CameraParams {
 public:
  // Identity pose, unit focals.
  CameraParams() = default;
  // Normalizes q; throws Error(kDegenerateRotation) for a zero quaternion and
  // Error(kNonFiniteInput) for non-positive or non-finite focals.
  CameraParams(const Vec4& q_wxyz, const Vec3& t, Real fx, Real fy);

  static CameraParams from_array(std::span<const Real> nine);
  std::array<Real, kCameraDims> to_array() const;

  const Vec4& q() const { return q_; }
  const Vec3& t() const { return t_; }
  Real fx() const { return fx_; }
  Real fy() const { return fy_; }
  Mat3 rotation() const;

  // World -> camera frame.
  Vec3 to_camera(const Vec3& world) const { return rotation() * world + t_; }
  // Camera center in world coordinates.
  Vec3 center() const { return -rotation().transpose() * t_; }

 private:
  Vec4 q_{1.0, 0.0, 0.0, 0.0};
  Vec3 t_ = Vec3::Zero();
  Real fx_ = 1.0;
  Real fy_ = 1.0;
};

struct PixelCoord {
  Real u = 0.0;
  Real v = 0.0;
  bool valid = false;
};

inline Real principal_x(const ImageSize& size) { return (size.width - 1) * 0.5; }
inline Real principal_y(const ImageSize& size) { return (size.height - 1) * 0.5; }

PixelCoord project_point(const CameraParams& cam, const ImageSize& size, const Vec3& world);
// Inverse of project_point at camera-frame depth z.
Vec3 unproject(const CameraParams& cam, const ImageSize& size, Real u, Real v, Real depth);

// ---- quaternion helpers ----------------------------------------------------

Mat3 rotation_from_quaternion(const Vec4& q_wxyz);
// dR/dq_k for the (unnormalized) polynomial R(q), k over (w, x, y, z).
std::array<Mat3, 4> rotation_jacobian(const Vec4& q_wxyz);
Vec4 quaternion_multiply(const Vec4& a, const Vec4& b);
Vec4 quaternion_conjugate(const Vec4& q);

// ---- bilinear sampling -----------------------------------------------------

// Clamp-to-edge bilinear interpolation over the four neighbors of (u, v).
std::vector<Real> bilinear_sample(const Image& img, const PixelCoord& at);

struct BilinearGrad {
  Real du = 0.0;
  Real dv = 0.0;
};
// Accumulates d(upstream . sample)/d(image) into `img_grad` (same layout as
// img) and returns the coordinate gradient. Coordinates outside the image
// have zero coordinate gradient (clamped).
BilinearGrad bilinear_sample_backward(const Image& img, const PixelCoord& at,
                                      std::span<const Real> upstream, std::span<Real> img_grad);

// ---- pose utilities --------------------------------------------------------

// Re-expresses every camera in the frame of camera 0; camera 0 becomes the
// identity pose. Intrinsics unchanged, relative poses preserved.
std::vector<CameraParams> canonicalize_poses(std::span<const CameraParams> cams);

// Geodesic angle between two rotations in degrees; sign-invariant in q.
Real relative_rotation_error(const CameraParams& a, const CameraParams& b);

// Rotation error of the relative pose between views i and j, prediction vs
// reference, in degrees.
Real pairwise_rotation_error(const CameraParams& pred_i, const CameraParams& pred_j,
                             const CameraParams& ref_i, const CameraParams& ref_j);

// ---- tape ops --------------------------------------------------------------

// Row-wise Hamilton product of two N x 4 tensors.
Tensor quat_mul(const Tensor& a, const Tensor& b);
// Row-wise R(q) v for q: N x 4, v: N x 3 (R is the quaternion polynomial).
Tensor quat_rotate(const Tensor& q, const Tensor& v);

// V x 9 raw head outputs -> V x 9 cameras: q = normalize((1,0,0,0) + raw_q),
// t = raw_t, f = focal_prior * exp(raw_f).
Tensor camera_from_raw(const Tensor& raw, Real focal_prior);
// Composes a raw refinement delta (same raw layout) onto cameras: rotation
// right-multiplied by normalize((1,0,0,0)+dq), translation added, focals
// scaled by exp(df). Zero delta is exactly the identity.
Tensor compose_camera_delta(const Tensor& cams, const Tensor& delta);
// Tape version of canonicalize_poses over a V x 9 tensor.
Tensor canonicalize_cameras(const Tensor& cams);

std::vector<CameraParams> cameras_from_tensor(const Tensor& cams);
Tensor cameras_to_tensor(std::span<const CameraParams> cams, bool requires_grad = false);

struct ProjectedPoints {
  Tensor coords;            // N x 2 (u, v); invalid rows are zero
  std::vector<bool> valid;  // z > kMinDepth
};
// Projects N x 3 world points through a 1 x 9 camera row.
ProjectedPoints project_points(const Tensor& camera_row, const Tensor& points,
                               const ImageSize& size);

// Gathers N x C samples from an (H*W) x C image tensor at N x 2 coordinates.
// Differentiable with respect to both the image and the coordinates.
Tensor bilinear_gather(const Tensor& image, const ImageSize& size, const Tensor& coords);

}  // namespace dualsplat
