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


#include "dualsplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

// Portable uniform draw; std distributions are not specified bit-for-bit.
Real uniform(std::mt19937_64& rng, Real lo, Real hi) {
  return lo + (hi - lo) * static_cast<Real>(rng() >> 11) * 0x1.0p-53;
}

Real radians(Real deg) { return deg * std::numbers::pi / 180.0; }

Mat3 yaw_matrix(Real yaw) {
  const Real c = std::cos(yaw), s = std::sin(yaw);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Real bounding_radius(const Primitive& p) {
  if (p.kind == PrimitiveKind::kSphere) return p.half_extent.x();
  return std::hypot(p.half_extent.x(), p.half_extent.z());
}

Vec3 hsv(Real h, Real s, Real v) {
  const Real k[3] = {5.0, 3.0, 1.0};
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    const Real m = std::fmod(k[i] + h * 6.0, 6.0);
    out[i] = v - v * s * std::max(0.0, std::min({m, 4.0 - m, 1.0}));
  }
  return out;
}

const Vec3& light_direction() {
  static const Vec3 l = Vec3(0.3, -0.8, -0.5).normalized();
  return l;
}

Real shade(const RayHit& h, Real texture) {
  const Vec3& x = h.local;
  const Real tex =
      1.0 - texture * 0.5 * (1.0 + std::sin(7.0 * x.x()) * std::sin(7.0 * x.y()) * std::sin(7.0 * x.z()));
  return (0.35 + 0.65 * std::max(0.0, h.normal.dot(light_direction()))) * tex;
}

struct Cast {
  int prim = -1;
  RayHit hit;
};

Cast cast(std::span<const Primitive> prims, const Vec3& origin, const Vec3& dir) {
  Cast best;
  best.hit.t = std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < prims.size(); ++i) {
    const RayHit h = intersect(prims[i], origin, dir);
    if (h.hit && h.t < best.hit.t) {
      best.hit = h;
      best.prim = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<Real> numbers_after(std::istringstream& in, const std::string& what) {
  std::vector<Real> v;
  Real x;
  while (in >> x) v.push_back(x);
  if (!in.eof()) throw Error(ErrorCode::kIoError, "malformed " + what + " line");
  return v;
}

}  // namespace

RayHit intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  RayHit out;
  if (prim.kind == PrimitiveKind::kSphere) {
    const Real r = prim.half_extent.x();
    const Vec3 oc = origin - prim.center;
    const Real a = dir.dot(dir), b = oc.dot(dir), c = oc.dot(oc) - r * r;
    const Real disc = b * b - a * c;
    if (disc < 0) return out;
    const Real sq = std::sqrt(disc);
    Real t = (-b - sq) / a;
    if (t <= 0) t = (-b + sq) / a;
    if (t <= 0) return out;
    out.t = t;
    out.local = origin + t * dir - prim.center;
    out.normal = out.local / r;
    out.hit = true;
    return out;
  }
  const Mat3 rot = yaw_matrix(prim.yaw);
  const Vec3 o = rot.transpose() * (origin - prim.center);
  const Vec3 d = rot.transpose() * dir;
  Real t0 = -std::numeric_limits<Real>::infinity(), t1 = std::numeric_limits<Real>::infinity();
  int axis = -1;
  Real sign = 0;
  for (int k = 0; k < 3; ++k) {
    const Real e = prim.half_extent[k];
    if (std::abs(d[k]) < 1e-15) {
      if (std::abs(o[k]) > e) return out;
      continue;
    }
    Real ta = (-e - o[k]) / d[k], tb = (e - o[k]) / d[k];
    Real s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis = k;
      sign = s;
    }
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t1 <= 0 || t0 <= 0 || axis < 0) return out;
  out.t = t0;
  out.local = o + t0 * d;
  Vec3 n = Vec3::Zero();
  n[axis] = sign;
  out.normal = rot * n;
  out.hit = true;
  return out;
}

void validate(const SceneConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigError, m); };
  if (c.views < 2) fail("scene views must be >= 2, got " + std::to_string(c.views));
  if (c.heldout < 0) fail("heldout must be >= 0");
  if (c.height <= 0 || c.width <= 0) fail("image size must be positive");
  if (c.classes < 2) fail("classes must be >= 2, got " + std::to_string(c.classes));
  if (c.classes + 1 > 64) fail("classes + background must fit 64 orthonormal codes");
  if (c.primitives < 1) fail("primitives must be >= 1");
  if (!(c.focal > 0)) fail("focal must be positive");
  if (!(c.radius > 2.0)) fail("radius must exceed 2 so cameras stay outside the unit cube");
  if (!(c.arc_degrees >= 0 && c.arc_degrees < 180)) fail("arc_degrees must be in [0, 180)");
  if (c.supersample < 1) fail("supersample must be >= 1");
  if (!(c.background >= 0.0 && c.background <= 1.0)) fail("background must lie in [0, 1]");
  if (!(c.texture >= 0 && c.texture <= 1)) fail("texture must be in [0, 1]");
}

CameraParams look_at(const Vec3& center, const Vec3& target, Real focal) {
  const Vec3 f = (target - center).normalized();
  const Vec3 down(0.0, 1.0, 0.0);
  const Vec3 x = down.cross(f).normalized();
  const Vec3 y = f.cross(x);
  Mat3 r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = f;
  Eigen::Quaternion<Real> q(r);
  if (q.w() < 0) q.coeffs() = -q.coeffs();
  return CameraParams(Vec4(q.w(), q.x(), q.y(), q.z()), -r * center, focal, focal);
}

ViewMaps render_primitives(std::span<const Primitive> prims, const CameraParams& cam,
                           const ImageSize& size, int classes, Real texture, int supersample,
                           Real background) {
  ViewMaps out{Image(size.height, size.width, 3), Image(size.height, size.width, 1),
               std::vector<int>(size.pixels(), classes)};
  const Mat3 rt = cam.rotation().transpose();
  const Vec3 origin = cam.center();
  const Real cx = principal_x(size), cy = principal_y(size);
  auto ray = [&](Real u, Real v) {
    return Vec3(rt * Vec3((u - cx) / cam.fx(), (v - cy) / cam.fy(), 1.0));
  };
  const int s = supersample;
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const Cast c = cast(prims, origin, ray(x, y));
      if (c.prim >= 0) {
        // The ray has unit camera-z component, so t is the camera depth.
        out.depth.at(y, x) = c.hit.t;
        out.labels[static_cast<std::size_t>(y) * size.width + x] = prims[c.prim].class_id;
      }
      Vec3 acc = Vec3::Zero();
      for (int a = 0; a < s; ++a) {
        for (int b = 0; b < s; ++b) {
          const Real du = (b + 0.5) / s - 0.5, dv = (a + 0.5) / s - 0.5;
          const Cast cs = (s == 1) ? c : cast(prims, origin, ray(x + du, y + dv));
          acc += cs.prim >= 0 ? Vec3(prims[cs.prim].color * shade(cs.hit, texture))
                              : Vec3::Constant(background);
        }
      }
      acc /= static_cast<Real>(s * s);
      for (int k = 0; k < 3; ++k) out.rgb.at(y, x, k) = std::clamp(acc[k], 0.0, 1.0);
    }
  }
  return out;
}

SyntheticScene gen_scene(const SceneConfig& config, std::uint64_t seed) {
  validate(config);
  SyntheticScene scene;
  scene.config = config;
  scene.seed = seed;
  std::mt19937_64 rng(seed);

  for (int i = 0; i < config.primitives; ++i) {
    Primitive p;
    p.kind = i % 2 == 0 ? PrimitiveKind::kBox : PrimitiveKind::kSphere;
    if (p.kind == PrimitiveKind::kBox) {
      p.half_extent = Vec3(uniform(rng, 0.18, 0.32), uniform(rng, 0.18, 0.32), uniform(rng, 0.18, 0.32));
      p.yaw = uniform(rng, 0.0, std::numbers::pi / 2);
    } else {
      p.half_extent = Vec3::Constant(uniform(rng, 0.2, 0.32));
    }
    p.color = hsv((i + uniform(rng, 0.0, 0.3)) / config.primitives, 0.65, 0.95);
    p.class_id = i % config.classes;
    const Real reach = 1.0 - std::max(bounding_radius(p), p.half_extent.y());
    // Rejection sampling keeps primitives from swallowing each other.
    for (int attempt = 0; attempt < 200; ++attempt) {
      p.center = Vec3(uniform(rng, -reach, reach), uniform(rng, -reach, reach) * 0.6,
                      uniform(rng, -reach, reach));
      bool ok = true;
      for (const auto& q : scene.primitives)
        ok = ok && (p.center - q.center).norm() > 0.8 * (bounding_radius(p) + bounding_radius(q));
      if (ok) break;
    }
    scene.primitives.push_back(p);
  }

  const int n = config.views + config.heldout;
  std::vector<bool> is_heldout(static_cast<std::size_t>(n), false);
  for (int j = 0; j < config.heldout; ++j)
    is_heldout[static_cast<std::size_t>((j + 0.5) * n / config.heldout)] = true;
  for (int k = 0; k < n; ++k) {
    const Real frac = n == 1 ? 0.5 : static_cast<Real>(k) / (n - 1);
    const Real az = radians(config.arc_degrees * (frac - 0.5) +
                            uniform(rng, -config.jitter_degrees, config.jitter_degrees));
    const Real el = radians(config.elevation_degrees +
                            uniform(rng, -config.jitter_degrees, config.jitter_degrees));
    const Vec3 center = config.radius * Vec3(std::sin(az) * std::cos(el), -std::sin(el),
                                             -std::cos(az) * std::cos(el));
    scene.cameras.push_back(look_at(center, Vec3::Zero(), config.focal));
    (is_heldout[static_cast<std::size_t>(k)] ? scene.heldout : scene.source)
        .push_back(static_cast<std::size_t>(k));
  }

  for (const auto& cam : scene.cameras) {
    ViewMaps m = render_primitives(scene.primitives, cam, scene.size(), config.classes,
                                   config.texture, config.supersample, config.background);
    scene.images.push_back(std::move(m.rgb));
    scene.depth.push_back(std::move(m.depth));
    scene.labels.push_back(std::move(m.labels));
  }
  return scene;
}

std::string format_camera_line(const CameraParams& cam) {
  std::string out = "cam";
  char buf[32];
  for (Real x : cam.to_array()) {
    std::snprintf(buf, sizeof(buf), " %.17g", x);
    out += buf;
  }
  return out;
}

CameraParams parse_camera_line(const std::string& line) {
  std::istringstream in(line);
  std::string tag;
  in >> tag;
  if (tag != "cam") throw Error(ErrorCode::kIoError, "expected a cam line");
  const auto v = numbers_after(in, "cam");
  if (v.size() != kCameraDims) throw Error(ErrorCode::kIoError, "cam line needs 9 values");
  return CameraParams::from_array(v);
}

std::string format_primitive_line(const Primitive& p) {
  char buf[256];
  if (p.kind == PrimitiveKind::kSphere) {
    std::snprintf(buf, sizeof(buf), "prim sphere %.17g %.17g %.17g %.17g %.17g %.17g %.17g %d",
                  p.center.x(), p.center.y(), p.center.z(), p.half_extent.x(), p.color.x(),
                  p.color.y(), p.color.z(), p.class_id);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "prim box %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %d",
                  p.center.x(), p.center.y(), p.center.z(), p.half_extent.x(), p.half_extent.y(),
                  p.half_extent.z(), p.yaw, p.color.x(), p.color.y(), p.color.z(), p.class_id);
  }
  return buf;
}

Primitive parse_primitive_line(const std::string& line) {
  std::istringstream in(line);
  std::string tag, kind;
  in >> tag >> kind;
  if (tag != "prim") throw Error(ErrorCode::kIoError, "expected a prim line");
  const auto v = numbers_after(in, "prim");
  Primitive p;
  auto class_of = [](Real x) {
    if (x < 0 || x != std::floor(x)) throw Error(ErrorCode::kIoError, "prim class must be an integer");
    return static_cast<int>(x);
  };
  if (kind == "sphere" && v.size() == 8) {
    p.kind = PrimitiveKind::kSphere;
    p.center = Vec3(v[0], v[1], v[2]);
    p.half_extent = Vec3::Constant(v[3]);
    p.color = Vec3(v[4], v[5], v[6]);
    p.class_id = class_of(v[7]);
  } else if (kind == "box" && v.size() == 11) {
    p.kind = PrimitiveKind::kBox;
    p.center = Vec3(v[0], v[1], v[2]);
    p.half_extent = Vec3(v[3], v[4], v[5]);
    p.yaw = v[6];
    p.color = Vec3(v[7], v[8], v[9]);
    p.class_id = class_of(v[10]);
  } else {
    throw Error(ErrorCode::kIoError, "unknown prim kind or arity: " + kind);
  }
  return p;
}

void write_scene(std::ostream& os, const SyntheticScene& scene) {
  os << "# seed " << scene.seed << "\n";
  for (const auto& cam : scene.cameras) os << format_camera_line(cam) << "\n";
  for (std::size_t i : scene.source) os << "view " << i << " source\n";
  for (std::size_t i : scene.heldout) os << "view " << i << " heldout\n";
  for (const auto& p : scene.primitives) os << format_primitive_line(p) << "\n";
}

}  // namespace dualsplat
