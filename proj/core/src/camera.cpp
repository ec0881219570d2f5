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

#include "dualsplat/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

// Clamp-to-edge bilinear footprint along one axis.
struct Axis {
  int lo = 0;
  int hi = 0;
  Real frac = 0.0;
  bool inside = false;  // coordinate within [0, n-1]; gradient passes
};

Axis bilinear_axis(Real coord, int n) {
  Axis a;
  a.inside = coord >= 0.0 && coord <= static_cast<Real>(n - 1);
  const Real c = std::clamp(coord, 0.0, static_cast<Real>(n - 1));
  if (n == 1) return a;
  a.lo = std::min(static_cast<int>(std::floor(c)), n - 2);
  a.hi = a.lo + 1;
  a.frac = c - a.lo;
  return a;
}

Vec4 row_quat(std::span<const Real> row) { return {row[0], row[1], row[2], row[3]}; }

}  // namespace

// ---- CameraParams ----------------------------------------------------------

CameraParams::CameraParams(const Vec4& q_wxyz, const Vec3& t, Real fx, Real fy)
    : t_(t), fx_(fx), fy_(fy) {
  const Real n = q_wxyz.norm();
  if (!(n > 1e-12) || !std::isfinite(n)) {
    throw Error(ErrorCode::kDegenerateRotation, "camera quaternion has zero norm");
  }
  q_ = q_wxyz / n;
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw Error(ErrorCode::kNonFiniteInput, "camera focal lengths must be positive");
  }
  if (!t.allFinite()) throw Error(ErrorCode::kNonFiniteInput, "camera translation not finite");
}

CameraParams CameraParams::from_array(std::span<const Real> nine) {
  if (nine.size() != kCameraDims) {
    throw Error(ErrorCode::kShapeError,
                "camera encoding needs 9 values, got " + std::to_string(nine.size()));
  }
  return CameraParams(Vec4(nine[0], nine[1], nine[2], nine[3]), Vec3(nine[4], nine[5], nine[6]),
                      nine[7], nine[8]);
}

std::array<Real, kCameraDims> CameraParams::to_array() const {
  return {q_[0], q_[1], q_[2], q_[3], t_[0], t_[1], t_[2], fx_, fy_};
}

Mat3 CameraParams::rotation() const { return rotation_from_quaternion(q_); }

PixelCoord project_point(const CameraParams& cam, const ImageSize& size, const Vec3& world) {
  const Vec3 x = cam.to_camera(world);
  PixelCoord out;
  if (!(x.z() > kMinDepth)) return out;
  out.u = cam.fx() * x.x() / x.z() + principal_x(size);
  out.v = cam.fy() * x.y() / x.z() + principal_y(size);
  out.valid = std::isfinite(out.u) && std::isfinite(out.v);
  return out;
}

Vec3 unproject(const CameraParams& cam, const ImageSize& size, Real u, Real v, Real depth) {
  const Vec3 x((u - principal_x(size)) / cam.fx() * depth, (v - principal_y(size)) / cam.fy() * depth,
               depth);
  return cam.rotation().transpose() * (x - cam.t());
}

// ---- quaternions -----------------------------------------------------------

Mat3 rotation_from_quaternion(const Vec4& q) {
  const Real w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),  //
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),   //
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

std::array<Mat3, 4> rotation_jacobian(const Vec4& q) {
  const Real w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -2 * z, 2 * y,  //
      2 * z, 0, -2 * x,      //
      -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z,  //
      2 * y, -4 * x, -2 * w,  //
      2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w,  //
      2 * x, 0, 2 * z,           //
      -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x,  //
      2 * w, -4 * z, 2 * y,       //
      2 * x, 2 * y, 0;
  return d;
}

Vec4 quaternion_multiply(const Vec4& a, const Vec4& b) {
  return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
          a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
          a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
          a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Vec4 quaternion_conjugate(const Vec4& q) { return {q[0], -q[1], -q[2], -q[3]}; }

// ---- bilinear --------------------------------------------------------------

std::vector<Real> bilinear_sample(const Image& img, const PixelCoord& at) {
  const Axis ax = bilinear_axis(at.u, img.width);
  const Axis ay = bilinear_axis(at.v, img.height);
  std::vector<Real> out(static_cast<std::size_t>(img.channels));
  for (int c = 0; c < img.channels; ++c) {
    const Real top = (1 - ax.frac) * img.at(ay.lo, ax.lo, c) + ax.frac * img.at(ay.lo, ax.hi, c);
    const Real bot = (1 - ax.frac) * img.at(ay.hi, ax.lo, c) + ax.frac * img.at(ay.hi, ax.hi, c);
    out[static_cast<std::size_t>(c)] = (1 - ay.frac) * top + ay.frac * bot;
  }
  return out;
}

BilinearGrad bilinear_sample_backward(const Image& img, const PixelCoord& at,
                                      std::span<const Real> upstream, std::span<Real> img_grad) {
  const Axis ax = bilinear_axis(at.u, img.width);
  const Axis ay = bilinear_axis(at.v, img.height);
  BilinearGrad g;
  const auto idx = [&](int y, int x, int c) {
    return (static_cast<std::size_t>(y) * img.width + x) * img.channels + c;
  };
  for (int c = 0; c < img.channels; ++c) {
    const Real up = upstream[static_cast<std::size_t>(c)];
    const Real i00 = img.at(ay.lo, ax.lo, c), i01 = img.at(ay.lo, ax.hi, c);
    const Real i10 = img.at(ay.hi, ax.lo, c), i11 = img.at(ay.hi, ax.hi, c);
    if (ax.inside && img.width > 1)
      g.du += up * ((1 - ay.frac) * (i01 - i00) + ay.frac * (i11 - i10));
    if (ay.inside && img.height > 1)
      g.dv += up * ((1 - ax.frac) * (i10 - i00) + ax.frac * (i11 - i01));
    if (!img_grad.empty()) {
      img_grad[idx(ay.lo, ax.lo, c)] += up * (1 - ax.frac) * (1 - ay.frac);
      img_grad[idx(ay.lo, ax.hi, c)] += up * ax.frac * (1 - ay.frac);
      img_grad[idx(ay.hi, ax.lo, c)] += up * (1 - ax.frac) * ay.frac;
      img_grad[idx(ay.hi, ax.hi, c)] += up * ax.frac * ay.frac;
    }
  }
  return g;
}

// ---- poses -----------------------------------------------------------------

std::vector<CameraParams> canonicalize_poses(std::span<const CameraParams> cams) {
  std::vector<CameraParams> out;
  if (cams.empty()) return out;
  const Vec4 q0c = quaternion_conjugate(cams[0].q());
  const Vec3 t0 = cams[0].t();
  out.reserve(cams.size());
  for (std::size_t i = 0; i < cams.size(); ++i) {
    if (i == 0) {
      out.emplace_back(Vec4(1, 0, 0, 0), Vec3::Zero(), cams[0].fx(), cams[0].fy());
      continue;
    }
    const Vec4 q = quaternion_multiply(cams[i].q(), q0c);
    const Vec3 t = cams[i].t() - rotation_from_quaternion(q.normalized()) * t0;
    out.emplace_back(q, t, cams[i].fx(), cams[i].fy());
  }
  return out;
}

Real relative_rotation_error(const CameraParams& a, const CameraParams& b) {
  const Vec4 d = quaternion_multiply(quaternion_conjugate(a.q()), b.q());
  const Real vec = d.tail<3>().norm();
  return 2.0 * std::atan2(vec, std::abs(d[0])) * 180.0 / std::numbers::pi;
}

Real pairwise_rotation_error(const CameraParams& pred_i, const CameraParams& pred_j,
                             const CameraParams& ref_i, const CameraParams& ref_j) {
  const Vec4 pred = quaternion_multiply(pred_i.q(), quaternion_conjugate(pred_j.q()));
  const Vec4 ref = quaternion_multiply(ref_i.q(), quaternion_conjugate(ref_j.q()));
  return relative_rotation_error(CameraParams(pred, Vec3::Zero(), 1, 1),
                                 CameraParams(ref, Vec3::Zero(), 1, 1));
}

// ---- tape ops --------------------------------------------------------------

Tensor quat_mul(const Tensor& a, const Tensor& b) {
  if (a.cols() != 4 || a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeError, "quat_mul: " + to_string(a.shape()) + " vs " +
                                            to_string(b.shape()));
  }
  const std::size_t n = a.rows();
  std::vector<Real> out(n * 4);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec4 r = quaternion_multiply(row_quat(a.values().subspan(i * 4, 4)),
                                       row_quat(b.values().subspan(i * 4, 4)));
    for (int k = 0; k < 4; ++k) out[i * 4 + static_cast<std::size_t>(k)] = r[k];
  }
  return Tensor::op(a.shape(), std::move(out), {a, b},
                    [a, b, n](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < n; ++i) {
                        const Vec4 qa = row_quat(a.values().subspan(i * 4, 4));
                        const Vec4 qb = row_quat(b.values().subspan(i * 4, 4));
                        const Vec4 go = row_quat(g.subspan(i * 4, 4));
                        // Product is bilinear: d/da = go (x) conj-ish via unit probes.
                        for (int k = 0; k < 4; ++k) {
                          Vec4 e = Vec4::Zero();
                          e[k] = 1.0;
                          if (!gi[0].empty())
                            gi[0][i * 4 + static_cast<std::size_t>(k)] +=
                                go.dot(quaternion_multiply(e, qb));
                          if (!gi[1].empty())
                            gi[1][i * 4 + static_cast<std::size_t>(k)] +=
                                go.dot(quaternion_multiply(qa, e));
                        }
                      }
                    });
}

Tensor quat_rotate(const Tensor& q, const Tensor& v) {
  if (q.cols() != 4 || v.cols() != 3 || q.rows() != v.rows()) {
    throw Error(ErrorCode::kShapeError, "quat_rotate: " + to_string(q.shape()) + " vs " +
                                            to_string(v.shape()));
  }
  const std::size_t n = q.rows();
  std::vector<Real> out(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat3 r = rotation_from_quaternion(row_quat(q.values().subspan(i * 4, 4)));
    const Vec3 x(v.values()[i * 3], v.values()[i * 3 + 1], v.values()[i * 3 + 2]);
    const Vec3 y = r * x;
    for (int k = 0; k < 3; ++k) out[i * 3 + static_cast<std::size_t>(k)] = y[k];
  }
  return Tensor::op(v.shape(), std::move(out), {q, v},
                    [q, v, n](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < n; ++i) {
                        const Vec4 qq = row_quat(q.values().subspan(i * 4, 4));
                        const Vec3 x(v.values()[i * 3], v.values()[i * 3 + 1],
                                     v.values()[i * 3 + 2]);
                        const Vec3 go(g[i * 3], g[i * 3 + 1], g[i * 3 + 2]);
                        if (!gi[1].empty()) {
                          const Vec3 gx = rotation_from_quaternion(qq).transpose() * go;
                          for (int k = 0; k < 3; ++k) gi[1][i * 3 + static_cast<std::size_t>(k)] += gx[k];
                        }
                        if (!gi[0].empty()) {
                          const auto d = rotation_jacobian(qq);
                          for (int k = 0; k < 4; ++k)
                            gi[0][i * 4 + static_cast<std::size_t>(k)] += go.dot(d[static_cast<std::size_t>(k)] * x);
                        }
                      }
                    });
}

namespace {
Tensor identity_quat_rows(std::size_t n) {
  std::vector<Real> v(n * 4, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * 4] = 1.0;
  return Tensor({n, 4}, std::move(v));
}
}  // namespace

Tensor camera_from_raw(const Tensor& raw, Real focal_prior) {
  if (raw.cols() != kCameraDims) {
    throw Error(ErrorCode::kShapeError, "camera_from_raw: " + to_string(raw.shape()));
  }
  const std::size_t n = raw.rows();
  const Tensor q = normalize_rows(add(slice_cols(raw, 0, 4), identity_quat_rows(n)));
  const Tensor t = slice_cols(raw, 4, 7);
  const Tensor f = scale(exp(slice_cols(raw, 7, 9)), focal_prior);
  const Tensor parts[] = {q, t, f};
  return concat_cols(parts);
}

Tensor compose_camera_delta(const Tensor& cams, const Tensor& delta) {
  if (cams.cols() != kCameraDims || cams.shape() != delta.shape()) {
    throw Error(ErrorCode::kShapeError, "compose_camera_delta: " + to_string(cams.shape()) +
                                            " vs " + to_string(delta.shape()));
  }
  const std::size_t n = cams.rows();
  const Tensor dq = normalize_rows(add(slice_cols(delta, 0, 4), identity_quat_rows(n)));
  const Tensor q = quat_mul(slice_cols(cams, 0, 4), dq);
  const Tensor t = add(slice_cols(cams, 4, 7), slice_cols(delta, 4, 7));
  const Tensor f = mul(slice_cols(cams, 7, 9), exp(slice_cols(delta, 7, 9)));
  const Tensor parts[] = {q, t, f};
  return concat_cols(parts);
}

Tensor canonicalize_cameras(const Tensor& cams) {
  if (cams.cols() != kCameraDims || cams.rows() == 0) {
    throw Error(ErrorCode::kShapeError, "canonicalize_cameras: " + to_string(cams.shape()));
  }
  const std::size_t n = cams.rows();
  std::vector<Real> conj(n * 4);
  for (std::size_t i = 0; i < n; ++i) {
    conj[i * 4] = 1.0;
    conj[i * 4 + 1] = conj[i * 4 + 2] = conj[i * 4 + 3] = -1.0;
  }
  const Tensor q = slice_cols(cams, 0, 4);
  const Tensor t = slice_cols(cams, 4, 7);
  const Tensor q0c = mul(repeat_rows(slice_rows(q, 0, 1), n), Tensor({n, 4}, std::move(conj)));
  const Tensor qc = quat_mul(q, q0c);
  const Tensor tc = sub(t, quat_rotate(qc, repeat_rows(slice_rows(t, 0, 1), n)));
  const Tensor parts[] = {qc, tc, slice_cols(cams, 7, 9)};
  return concat_cols(parts);
}

std::vector<CameraParams> cameras_from_tensor(const Tensor& cams) {
  std::vector<CameraParams> out;
  out.reserve(cams.rows());
  for (std::size_t i = 0; i < cams.rows(); ++i)
    out.push_back(CameraParams::from_array(cams.values().subspan(i * kCameraDims, kCameraDims)));
  return out;
}

Tensor cameras_to_tensor(std::span<const CameraParams> cams, bool requires_grad) {
  std::vector<Real> v;
  v.reserve(cams.size() * kCameraDims);
  for (const auto& c : cams) {
    const auto a = c.to_array();
    v.insert(v.end(), a.begin(), a.end());
  }
  return Tensor({cams.size(), kCameraDims}, std::move(v), requires_grad);
}

ProjectedPoints project_points(const Tensor& camera_row, const Tensor& points,
                               const ImageSize& size) {
  if (camera_row.size() != kCameraDims || points.cols() != 3) {
    throw Error(ErrorCode::kShapeError, "project_points: " + to_string(camera_row.shape()) +
                                            " / " + to_string(points.shape()));
  }
  const std::size_t n = points.rows();
  auto cv = camera_row.values();
  const Vec4 qraw = row_quat(cv);
  const Real qn = qraw.norm();
  if (!(qn > 1e-12)) throw Error(ErrorCode::kDegenerateRotation, "project_points camera");
  const Mat3 rot = rotation_from_quaternion(qraw / qn);
  const Vec3 t(cv[4], cv[5], cv[6]);
  const Real fx = cv[7], fy = cv[8];
  const Real cx = principal_x(size), cy = principal_y(size);

  auto valid = std::make_shared<std::vector<bool>>(n, false);
  std::vector<Real> out(n * 2, 0.0);
  auto pv = points.values();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x = rot * Vec3(pv[i * 3], pv[i * 3 + 1], pv[i * 3 + 2]) + t;
    if (!(x.z() > kMinDepth)) continue;
    (*valid)[i] = true;
    out[i * 2] = fx * x.x() / x.z() + cx;
    out[i * 2 + 1] = fy * x.y() / x.z() + cy;
  }
  Tensor coords = Tensor::op(
      {n, 2}, std::move(out), {camera_row, points},
      [camera_row, points, valid, n](std::span<const Real> g, std::span<const std::span<Real>> gi) {
        auto cv = camera_row.values();
        const Vec4 qraw = row_quat(cv);
        const Real qn = qraw.norm();
        const Vec4 qh = qraw / qn;
        const Mat3 rot = rotation_from_quaternion(qh);
        const Vec3 t(cv[4], cv[5], cv[6]);
        const Real fx = cv[7], fy = cv[8];
        auto pv = points.values();
        Mat3 grad_r = Mat3::Zero();
        Vec3 grad_t = Vec3::Zero();
        Real gfx = 0, gfy = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!(*valid)[i]) continue;
          const Vec3 p(pv[i * 3], pv[i * 3 + 1], pv[i * 3 + 2]);
          const Vec3 x = rot * p + t;
          const Real gu = g[i * 2], gv = g[i * 2 + 1];
          const Real iz = 1.0 / x.z();
          const Vec3 gx(gu * fx * iz, gv * fy * iz, -(gu * fx * x.x() + gv * fy * x.y()) * iz * iz);
          gfx += gu * x.x() * iz;
          gfy += gv * x.y() * iz;
          grad_t += gx;
          grad_r += gx * p.transpose();
          if (!gi[1].empty()) {
            const Vec3 gp = rot.transpose() * gx;
            for (int k = 0; k < 3; ++k) gi[1][i * 3 + static_cast<std::size_t>(k)] += gp[k];
          }
        }
        if (gi[0].empty()) return;
        const auto d = rotation_jacobian(qh);
        Vec4 gq_hat;
        for (int k = 0; k < 4; ++k) gq_hat[k] = (grad_r.array() * d[static_cast<std::size_t>(k)].array()).sum();
        const Vec4 gq = (gq_hat - qh * qh.dot(gq_hat)) / qn;
        for (int k = 0; k < 4; ++k) gi[0][static_cast<std::size_t>(k)] += gq[k];
        for (int k = 0; k < 3; ++k) gi[0][4 + static_cast<std::size_t>(k)] += grad_t[k];
        gi[0][7] += gfx;
        gi[0][8] += gfy;
      });
  return {std::move(coords), *valid};
}

Tensor bilinear_gather(const Tensor& image, const ImageSize& size, const Tensor& coords) {
  if (image.rows() != size.pixels() || coords.cols() != 2) {
    throw Error(ErrorCode::kShapeError, "bilinear_gather: " + to_string(image.shape()) + " / " +
                                            to_string(coords.shape()));
  }
  const std::size_t n = coords.rows();
  const std::size_t c = image.cols();
  const int w = size.width, h = size.height;
  auto iv = image.values();
  auto cv = coords.values();
  std::vector<Real> out(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    const Axis ax = bilinear_axis(cv[i * 2], w);
    const Axis ay = bilinear_axis(cv[i * 2 + 1], h);
    const Real* p00 = iv.data() + (static_cast<std::size_t>(ay.lo) * w + ax.lo) * c;
    const Real* p01 = iv.data() + (static_cast<std::size_t>(ay.lo) * w + ax.hi) * c;
    const Real* p10 = iv.data() + (static_cast<std::size_t>(ay.hi) * w + ax.lo) * c;
    const Real* p11 = iv.data() + (static_cast<std::size_t>(ay.hi) * w + ax.hi) * c;
    for (std::size_t k = 0; k < c; ++k) {
      out[i * c + k] = (1 - ay.frac) * ((1 - ax.frac) * p00[k] + ax.frac * p01[k]) +
                       ay.frac * ((1 - ax.frac) * p10[k] + ax.frac * p11[k]);
    }
  }
  return Tensor::op(
      {n, c}, std::move(out), {image, coords},
      [image, coords, n, c, w, h](std::span<const Real> g, std::span<const std::span<Real>> gi) {
        auto iv = image.values();
        auto cv = coords.values();
        for (std::size_t i = 0; i < n; ++i) {
          const Axis ax = bilinear_axis(cv[i * 2], w);
          const Axis ay = bilinear_axis(cv[i * 2 + 1], h);
          const std::size_t o00 = (static_cast<std::size_t>(ay.lo) * w + ax.lo) * c;
          const std::size_t o01 = (static_cast<std::size_t>(ay.lo) * w + ax.hi) * c;
          const std::size_t o10 = (static_cast<std::size_t>(ay.hi) * w + ax.lo) * c;
          const std::size_t o11 = (static_cast<std::size_t>(ay.hi) * w + ax.hi) * c;
          Real du = 0, dv = 0;
          for (std::size_t k = 0; k < c; ++k) {
            const Real up = g[i * c + k];
            if (up == 0.0) continue;
            if (!gi[0].empty()) {
              gi[0][o00 + k] += up * (1 - ax.frac) * (1 - ay.frac);
              gi[0][o01 + k] += up * ax.frac * (1 - ay.frac);
              gi[0][o10 + k] += up * (1 - ax.frac) * ay.frac;
              gi[0][o11 + k] += up * ax.frac * ay.frac;
            }
            du += up * ((1 - ay.frac) * (iv[o01 + k] - iv[o00 + k]) +
                        ay.frac * (iv[o11 + k] - iv[o10 + k]));
            dv += up * ((1 - ax.frac) * (iv[o10 + k] - iv[o00 + k]) +
                        ax.frac * (iv[o11 + k] - iv[o01 + k]));
          }
          if (!gi[1].empty()) {
            if (ax.inside && w > 1) gi[1][i * 2] += du;
            if (ay.inside && h > 1) gi[1][i * 2 + 1] += dv;
          }
        }
      });
}

}  // namespace dualsplat
