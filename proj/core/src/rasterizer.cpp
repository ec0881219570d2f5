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

#include "dualsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

#include "dualsplat/error.hpp"
#include "dualsplat/parallel.hpp"

namespace dualsplat {

namespace detail {

struct ProjectedSplat {
  std::size_t source = 0;
  Real mx = 0, my = 0;
  Real cxx = 0, cxy = 0, cyy = 0;  // regularized 2-D covariance
  Real ca = 0, cb = 0, cc = 0;     // its inverse (conic)
  Real depth = 0;
  Real sigma = 0;
  Real m2max = 0;  // squared Mahalanobis radius of the footprint
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

struct RenderRecord {
  Vec4 cam_q_raw;
  CameraParams camera;
  ImageSize size;
  RenderChannels channels;
  RenderOptions options;
  std::size_t count = 0;
  std::vector<Real> centers, opacity, rotation, scales, colors, semantics, importance;
  std::vector<ProjectedSplat> splats;  // depth order
  std::vector<std::uint32_t> offsets;  // per-pixel CSR into entries
  std::vector<std::uint32_t> entry_splat;
  std::vector<Real> entry_alpha;
  std::vector<Real> entry_t;
  std::vector<std::uint32_t> n_contrib;
  std::vector<Real> t_final;
};

}  // namespace detail

namespace {

using detail::ProjectedSplat;
using detail::RenderRecord;
using Mat23 = Eigen::Matrix<Real, 2, 3>;
using Mat2 = Eigen::Matrix<Real, 2, 2>;

constexpr int kRowsPerChunk = 8;

Vec3 vec3_at(std::span<const Real> a, std::size_t i) {
  return {a[i * 3], a[i * 3 + 1], a[i * 3 + 2]};
}
Vec4 vec4_at(std::span<const Real> a, std::size_t i) {
  return {a[i * 4], a[i * 4 + 1], a[i * 4 + 2], a[i * 4 + 3]};
}

struct Intermediates {
  Mat3 cam_rot;
  Vec3 x_cam;
  Mat23 jac;   // perspective Jacobian at x_cam
  Mat23 proj;  // jac * cam_rot
  Mat3 rot_g;  // Gaussian rotation (normalized quaternion)
  Vec4 q_hat;
  Real q_norm = 1;
  Mat3 m;      // rot_g * diag(s)
  Mat3 sigma3; // m m^T
};

Intermediates intermediates(const CameraParams& cam, const Vec3& mu, const Vec4& r,
                            const Vec3& s) {
  Intermediates it;
  it.cam_rot = cam.rotation();
  it.x_cam = it.cam_rot * mu + cam.t();
  it.q_norm = r.norm();
  it.q_hat = r / it.q_norm;
  it.rot_g = rotation_from_quaternion(it.q_hat);
  it.m = it.rot_g * s.asDiagonal();
  it.sigma3 = it.m * it.m.transpose();
  const Real x = it.x_cam.x(), y = it.x_cam.y(), z = it.x_cam.z();
  it.jac << cam.fx() / z, 0, -cam.fx() * x / (z * z),  //
      0, cam.fy() / z, -cam.fy() * y / (z * z);
  it.proj = it.jac * it.cam_rot;
  return it;
}

std::optional<ProjectedSplat> project_internal(const CameraParams& cam, const ImageSize& size,
                                               const Vec3& mu, const Vec4& r, const Vec3& s,
                                               Real sigma, const RenderOptions& options) {
  if (!(r.norm() > 1e-12)) throw Error(ErrorCode::kDegenerateRotation, "gaussian rotation");
  const Vec3 xc = cam.to_camera(mu);
  if (!(xc.z() > kMinDepth)) return std::nullopt;
  const Intermediates it = intermediates(cam, mu, r, s);
  const Mat2 cov = it.proj * it.sigma3 * it.proj.transpose() + kCovRegularizer * Mat2::Identity();

  ProjectedSplat p;
  p.mx = cam.fx() * xc.x() / xc.z() + principal_x(size);
  p.my = cam.fy() * xc.y() / xc.z() + principal_y(size);
  p.cxx = cov(0, 0);
  p.cxy = 0.5 * (cov(0, 1) + cov(1, 0));
  p.cyy = cov(1, 1);
  p.depth = xc.z();
  p.sigma = sigma;

  const Real sx = std::sqrt(p.cxx), sy = std::sqrt(p.cyy);
  const Real w = size.width, h = size.height;
  if (p.mx + kCullSigmas * sx < -0.5 || p.mx - kCullSigmas * sx > w - 0.5 ||
      p.my + kCullSigmas * sy < -0.5 || p.my - kCullSigmas * sy > h - 0.5) {
    return std::nullopt;
  }
  const Real det = p.cxx * p.cyy - p.cxy * p.cxy;
  p.ca = p.cyy / det;
  p.cb = -p.cxy / det;
  p.cc = p.cxx / det;

  if (options.alpha_mode == AlphaMode::kOpacityOnly || options.alpha_floor <= 0.0) {
    p.m2max = std::numeric_limits<Real>::infinity();
    p.x0 = 0;
    p.x1 = size.width - 1;
    p.y0 = 0;
    p.y1 = size.height - 1;
  } else if (sigma > options.alpha_floor) {
    p.m2max = 2.0 * std::log(sigma / options.alpha_floor);
    const Real rx = std::sqrt(p.m2max * p.cxx), ry = std::sqrt(p.m2max * p.cyy);
    p.x0 = std::max(0, static_cast<int>(std::ceil(p.mx - rx)));
    p.x1 = std::min(size.width - 1, static_cast<int>(std::floor(p.mx + rx)));
    p.y0 = std::max(0, static_cast<int>(std::ceil(p.my - ry)));
    p.y1 = std::min(size.height - 1, static_cast<int>(std::floor(p.my + ry)));
  }
  return p;
}

Real mahalanobis2(const ProjectedSplat& s, Real dx, Real dy) {
  return s.ca * dx * dx + 2.0 * s.cb * dx * dy + s.cc * dy * dy;
}

void check_finite(std::span<const Real> values, const char* what) {
  for (Real v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFiniteInput, std::string("gaussian ") + what);
  }
}

std::vector<Real> copy_of(std::span<const Real> s) { return {s.begin(), s.end()}; }

void check_span(std::span<const Real> s, std::size_t expected, const char* what) {
  if (s.size() != expected) {
    throw Error(ErrorCode::kShapeError, std::string("render: ") + what + " has " +
                                            std::to_string(s.size()) + " values, expected " +
                                            std::to_string(expected));
  }
}

}  // namespace

GaussianArrays GaussianArrays::from(const GaussianTensors& field) {
  GaussianArrays a;
  a.count = field.count();
  if (a.count == 0) return a;
  a.centers = field.centers.values();
  a.opacity = field.opacity.values();
  a.rotation = field.rotation.values();
  a.scales = field.scales.values();
  if (field.colors.defined()) a.colors = field.colors.values();
  if (field.semantics.defined()) a.semantics = field.semantics.values();
  if (field.importance.defined()) a.importance = field.importance.values();
  return a;
}

std::optional<Splat2D> project_gaussian(const CameraParams& cam, const ImageSize& size,
                                        const Vec3& mu, const Vec4& r, const Vec3& s, Real sigma) {
  const auto p = project_internal(cam, size, mu, r, s, sigma, RenderOptions{});
  if (!p) return std::nullopt;
  Splat2D out;
  out.mean2d = {p->mx, p->my, true};
  out.cov_xx = p->cxx;
  out.cov_xy = p->cxy;
  out.cov_yy = p->cyy;
  out.depth = p->depth;
  out.sigma = sigma;
  return out;
}

std::optional<Splat2D> project_gaussian(const CameraParams& cam, const ImageSize& size,
                                        const RenderGaussian& g) {
  return project_gaussian(cam, size, g.center, g.r, g.s, g.sigma);
}

std::optional<Splat2D> project_gaussian(const CameraParams& cam, const ImageSize& size,
                                        const GeometricGaussian& g) {
  return project_gaussian(cam, size, g.mu, g.r, g.s, g.sigma);
}

// ---- forward ---------------------------------------------------------------

namespace {

RenderedMaps render_impl(const Vec4& cam_q_raw, const CameraParams& cam, const ImageSize& size,
                         const GaussianArrays& field, const RenderChannels& channels,
                         const RenderOptions& options, RenderTape* tape) {
  if (size.width <= 0 || size.height <= 0) {
    throw Error(ErrorCode::kShapeError, "render: image size must be positive");
  }
  const std::size_t n = field.count;
  check_span(field.centers, n * 3, "centers");
  check_span(field.opacity, n, "opacity");
  check_span(field.rotation, n * 4, "rotation");
  check_span(field.scales, n * 3, "scales");
  check_finite(field.centers, "centers");
  check_finite(field.opacity, "opacity");
  check_finite(field.rotation, "rotation");
  check_finite(field.scales, "scales");
  if (channels.rgb) {
    check_span(field.colors, n * 3, "colors");
    check_finite(field.colors, "colors");
  }
  if (channels.semantics) {
    check_span(field.semantics, n * kSemanticDims, "semantics");
    check_finite(field.semantics, "semantics");
  }
  if (channels.importance) {
    check_span(field.importance, n, "importance");
    check_finite(field.importance, "importance");
  }
  std::vector<Real> bg_sem(kSemanticDims, 0.0);
  if (!options.background_semantics.empty()) {
    check_span(options.background_semantics, kSemanticDims, "background semantics");
    bg_sem = options.background_semantics;
  }

  auto rec = std::make_shared<RenderRecord>();
  rec->cam_q_raw = cam_q_raw;
  rec->camera = cam;
  rec->size = size;
  rec->channels = channels;
  rec->options = options;
  rec->count = n;

  // Project and depth-sort (ties by input index).
  std::vector<ProjectedSplat> projected;
  projected.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto p = project_internal(cam, size, vec3_at(field.centers, i), vec4_at(field.rotation, i),
                              vec3_at(field.scales, i), field.opacity[i], options);
    if (!p) continue;
    p->source = i;
    projected.push_back(*p);
  }
  std::stable_sort(projected.begin(), projected.end(),
                   [](const ProjectedSplat& a, const ProjectedSplat& b) {
                     return a.depth < b.depth || (a.depth == b.depth && a.source < b.source);
                   });

  // Per-pixel lists in depth order (counting sort keeps splat order stable).
  const std::size_t pixels = size.pixels();
  const int width = size.width;
  std::vector<std::uint32_t> offsets(pixels + 1, 0);
  std::vector<std::uint32_t> pair_pixel;
  std::vector<std::uint32_t> pair_splat;
  for (std::size_t k = 0; k < projected.size(); ++k) {
    const ProjectedSplat& s = projected[k];
    for (int y = s.y0; y <= s.y1; ++y) {
      for (int x = s.x0; x <= s.x1; ++x) {
        if (!(mahalanobis2(s, x - s.mx, y - s.my) <= s.m2max)) continue;
        const auto p = static_cast<std::uint32_t>(y * width + x);
        pair_pixel.push_back(p);
        pair_splat.push_back(static_cast<std::uint32_t>(k));
        ++offsets[p + 1];
      }
    }
  }
  for (std::size_t p = 0; p < pixels; ++p) offsets[p + 1] += offsets[p];
  std::vector<std::uint32_t> entry_splat(pair_pixel.size());
  {
    std::vector<std::uint32_t> cursor(offsets.begin(), offsets.end() - 1);
    for (std::size_t e = 0; e < pair_pixel.size(); ++e) entry_splat[cursor[pair_pixel[e]]++] = pair_splat[e];
  }
  pair_pixel.clear();
  pair_pixel.shrink_to_fit();
  pair_splat.clear();
  pair_splat.shrink_to_fit();

  RenderedMaps maps;
  const int h = size.height;
  if (channels.rgb) maps.rgb = Image(h, width, 3);
  if (channels.semantics) maps.semantics = Image(h, width, static_cast<int>(kSemanticDims));
  if (channels.importance) maps.importance = Image(h, width, 1);
  if (channels.depth) maps.depth = Image(h, width, 1);
  maps.alpha = Image(h, width, 1);

  std::vector<Real> entry_alpha(entry_splat.size(), 0.0);
  std::vector<Real> entry_t(entry_splat.size(), 0.0);
  std::vector<std::uint32_t> n_contrib(pixels, 0);
  std::vector<Real> t_final(pixels, 1.0);

  const bool falloff = options.alpha_mode == AlphaMode::kFalloff;
  const std::size_t chunks = static_cast<std::size_t>((h + kRowsPerChunk - 1) / kRowsPerChunk);
  parallel_for(chunks, options.workers, [&](std::size_t chunk) {
    const int y_begin = static_cast<int>(chunk) * kRowsPerChunk;
    const int y_end = std::min(h, y_begin + kRowsPerChunk);
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        Real t = 1.0;
        Real acc_alpha = 0.0;
        std::uint32_t count = 0;
        Real* rgb = channels.rgb ? &maps.rgb.data[p * 3] : nullptr;
        Real* sem = channels.semantics ? &maps.semantics.data[p * kSemanticDims] : nullptr;
        for (std::uint32_t e = offsets[p]; e < offsets[p + 1]; ++e) {
          const ProjectedSplat& s = projected[entry_splat[e]];
          Real alpha = s.sigma;
          if (falloff) alpha *= std::exp(-0.5 * mahalanobis2(s, x - s.mx, y - s.my));
          alpha = std::min(alpha, kMaxAlpha);
          const Real w = alpha * t;
          entry_alpha[e] = alpha;
          entry_t[e] = t;
          if (rgb) {
            for (std::size_t c = 0; c < 3; ++c) rgb[c] += w * field.colors[s.source * 3 + c];
          }
          if (sem) {
            const Real* g = field.semantics.data() + s.source * kSemanticDims;
            for (std::size_t c = 0; c < kSemanticDims; ++c) sem[c] += w * g[c];
          }
          if (channels.importance) maps.importance.data[p] += w * field.importance[s.source];
          if (channels.depth) maps.depth.data[p] += w * s.depth;
          acc_alpha += w;
          t *= 1.0 - alpha;
          ++count;
          if (options.early_exit && t < kTransmittanceStop) break;
        }
        n_contrib[p] = count;
        t_final[p] = t;
        maps.alpha.data[p] = acc_alpha;
        if (rgb) {
          for (std::size_t c = 0; c < 3; ++c) rgb[c] += t * options.background_rgb[c];
        }
        if (sem) {
          for (std::size_t c = 0; c < kSemanticDims; ++c) sem[c] += t * bg_sem[c];
        }
      }
    }
  });

  if (tape != nullptr) {
    rec->centers = copy_of(field.centers);
    rec->opacity = copy_of(field.opacity);
    rec->rotation = copy_of(field.rotation);
    rec->scales = copy_of(field.scales);
    if (channels.rgb) rec->colors = copy_of(field.colors);
    if (channels.semantics) rec->semantics = copy_of(field.semantics);
    if (channels.importance) rec->importance = copy_of(field.importance);
    rec->options.background_semantics = bg_sem;
    rec->splats = std::move(projected);
    rec->offsets = std::move(offsets);
    rec->entry_splat = std::move(entry_splat);
    rec->entry_alpha = std::move(entry_alpha);
    rec->entry_t = std::move(entry_t);
    rec->n_contrib = std::move(n_contrib);
    rec->t_final = std::move(t_final);
    tape->reset(std::move(rec));
  }
  return maps;
}

}  // namespace

RenderedMaps render(const CameraParams& cam, const ImageSize& size, const GaussianArrays& field,
                    const RenderChannels& channels, const RenderOptions& options,
                    RenderTape* tape) {
  return render_impl(cam.q(), cam, size, field, channels, options, tape);
}

RenderedMaps render(const CameraParams& cam, const ImageSize& size,
                    std::span<const RenderGaussian> field, const RenderChannels& channels,
                    const RenderOptions& options) {
  const GaussianTensors t = from_render_gaussians(field);
  return render(cam, size, GaussianArrays::from(t), channels, options);
}

// ---- backward --------------------------------------------------------------

namespace {

// Per-splat screen-space gradient slots.
enum Slot : std::size_t { kMx, kMy, kA, kB, kC, kSigma, kZ, kSlots };

struct ChunkGrads {
  std::vector<Real> geo;      // splats x kSlots
  std::vector<Real> rgb;      // splats x 3
  std::vector<Real> sem;      // splats x 64
  std::vector<Real> imp;      // splats
};

}  // namespace

RenderGradients render_backward(const RenderTape& tape, const RenderUpstream& up) {
  if (!tape.recorded()) throw Error(ErrorCode::kNoForwardTape, "render_backward without forward");
  const RenderRecord& rec = tape.record();
  const std::size_t pixels = rec.size.pixels();
  const int width = rec.size.width, height = rec.size.height;
  const std::size_t ns = rec.splats.size();
  const bool falloff = rec.options.alpha_mode == AlphaMode::kFalloff;
  const bool use_rgb = rec.channels.rgb && !up.rgb.empty();
  const bool use_sem = rec.channels.semantics && !up.semantics.empty();
  const bool use_imp = rec.channels.importance && !up.importance.empty();
  const bool use_depth = rec.channels.depth && !up.depth.empty();
  const bool use_alpha = !up.alpha.empty();
  if (use_rgb) check_span(up.rgb, pixels * 3, "upstream rgb");
  if (use_sem) check_span(up.semantics, pixels * kSemanticDims, "upstream semantics");
  if (use_imp) check_span(up.importance, pixels, "upstream importance");
  if (use_depth) check_span(up.depth, pixels, "upstream depth");
  if (use_alpha) check_span(up.alpha, pixels, "upstream alpha");

  const std::size_t chunks = static_cast<std::size_t>((height + kRowsPerChunk - 1) / kRowsPerChunk);
  std::vector<ChunkGrads> partial(chunks);
  parallel_for(chunks, rec.options.workers, [&](std::size_t chunk) {
    ChunkGrads& cg = partial[chunk];
    cg.geo.assign(ns * kSlots, 0.0);
    if (use_rgb) cg.rgb.assign(ns * 3, 0.0);
    if (use_sem) cg.sem.assign(ns * kSemanticDims, 0.0);
    if (use_imp) cg.imp.assign(ns, 0.0);
    std::array<Real, 3> acc_rgb{};
    std::vector<Real> acc_sem(kSemanticDims);
    const int y_begin = static_cast<int>(chunk) * kRowsPerChunk;
    const int y_end = std::min(height, y_begin + kRowsPerChunk);
    for (int y = y_begin; y < y_end; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * width + x;
        const Real tf = rec.t_final[p];
        const Real* g_rgb = use_rgb ? &up.rgb[p * 3] : nullptr;
        const Real* g_sem = use_sem ? &up.semantics[p * kSemanticDims] : nullptr;
        const Real g_imp = use_imp ? up.importance[p] : 0.0;
        const Real g_depth = use_depth ? up.depth[p] : 0.0;
        const Real g_alpha = use_alpha ? up.alpha[p] : 0.0;
        if (g_rgb)
          for (std::size_t c = 0; c < 3; ++c) acc_rgb[c] = tf * rec.options.background_rgb[c];
        if (g_sem)
          for (std::size_t c = 0; c < kSemanticDims; ++c)
            acc_sem[c] = tf * rec.options.background_semantics[c];
        Real acc_imp = 0.0, acc_depth = 0.0, acc_alpha = 0.0;

        const std::uint32_t begin = rec.offsets[p];
        for (std::uint32_t e = begin + rec.n_contrib[p]; e-- > begin;) {
          const std::uint32_t k = rec.entry_splat[e];
          const ProjectedSplat& s = rec.splats[k];
          const Real alpha = rec.entry_alpha[e];
          const Real t = rec.entry_t[e];
          const Real w = alpha * t;
          const Real inv_one_minus = 1.0 / (1.0 - alpha);
          Real d_alpha = 0.0;
          if (g_rgb) {
            const Real* col = &rec.colors[s.source * 3];
            for (std::size_t c = 0; c < 3; ++c) {
              d_alpha += g_rgb[c] * (col[c] * t - acc_rgb[c] * inv_one_minus);
              acc_rgb[c] += w * col[c];
              cg.rgb[k * 3 + c] += w * g_rgb[c];
            }
          }
          if (g_sem) {
            const Real* gam = &rec.semantics[s.source * kSemanticDims];
            Real* out = &cg.sem[k * kSemanticDims];
            for (std::size_t c = 0; c < kSemanticDims; ++c) {
              d_alpha += g_sem[c] * (gam[c] * t - acc_sem[c] * inv_one_minus);
              acc_sem[c] += w * gam[c];
              out[c] += w * g_sem[c];
            }
          }
          if (use_imp) {
            const Real beta = rec.importance[s.source];
            d_alpha += g_imp * (beta * t - acc_imp * inv_one_minus);
            acc_imp += w * beta;
            cg.imp[k] += w * g_imp;
          }
          if (use_depth) {
            d_alpha += g_depth * (s.depth * t - acc_depth * inv_one_minus);
            acc_depth += w * s.depth;
            cg.geo[k * kSlots + kZ] += w * g_depth;
          }
          if (use_alpha) {
            d_alpha += g_alpha * (t - acc_alpha * inv_one_minus);
            acc_alpha += w;
          }

          Real* geo = &cg.geo[k * kSlots];
          if (!falloff) {
            if (s.sigma < kMaxAlpha) geo[kSigma] += d_alpha;
            continue;
          }
          const Real dx = x - s.mx, dy = y - s.my;
          const Real falloff_value = std::exp(-0.5 * mahalanobis2(s, dx, dy));
          if (s.sigma * falloff_value >= kMaxAlpha) continue;  // clamped: flat
          geo[kSigma] += d_alpha * falloff_value;
          const Real d_power = d_alpha * alpha;
          geo[kMx] += d_power * (s.ca * dx + s.cb * dy);
          geo[kMy] += d_power * (s.cb * dx + s.cc * dy);
          geo[kA] += d_power * (-0.5 * dx * dx);
          geo[kB] += d_power * (-dx * dy);
          geo[kC] += d_power * (-0.5 * dy * dy);
        }
      }
    }
  });

  // Fixed-order reduction over chunks.
  std::vector<Real> geo(ns * kSlots, 0.0);
  std::vector<Real> d_rgb(use_rgb ? ns * 3 : 0, 0.0);
  std::vector<Real> d_sem(use_sem ? ns * kSemanticDims : 0, 0.0);
  std::vector<Real> d_imp(use_imp ? ns : 0, 0.0);
  for (const ChunkGrads& cg : partial) {
    for (std::size_t i = 0; i < geo.size(); ++i) geo[i] += cg.geo[i];
    for (std::size_t i = 0; i < d_rgb.size(); ++i) d_rgb[i] += cg.rgb[i];
    for (std::size_t i = 0; i < d_sem.size(); ++i) d_sem[i] += cg.sem[i];
    for (std::size_t i = 0; i < d_imp.size(); ++i) d_imp[i] += cg.imp[i];
  }

  RenderGradients out;
  const std::size_t n = rec.count;
  out.centers.assign(n * 3, 0.0);
  out.opacity.assign(n, 0.0);
  out.rotation.assign(n * 4, 0.0);
  out.scales.assign(n * 3, 0.0);
  if (rec.channels.rgb) out.colors.assign(n * 3, 0.0);
  if (rec.channels.semantics) out.semantics.assign(n * kSemanticDims, 0.0);
  if (rec.channels.importance) out.importance.assign(n, 0.0);

  const CameraParams& cam = rec.camera;
  Mat3 d_cam_rot = Mat3::Zero();
  Vec3 d_cam_t = Vec3::Zero();
  Real d_fx = 0.0, d_fy = 0.0;

  for (std::size_t k = 0; k < ns; ++k) {
    const ProjectedSplat& s = rec.splats[k];
    const std::size_t i = s.source;
    const Real* g = &geo[k * kSlots];
    out.opacity[i] += g[kSigma];
    if (use_rgb)
      for (std::size_t c = 0; c < 3; ++c) out.colors[i * 3 + c] += d_rgb[k * 3 + c];
    if (use_sem)
      for (std::size_t c = 0; c < kSemanticDims; ++c)
        out.semantics[i * kSemanticDims + c] += d_sem[k * kSemanticDims + c];
    if (use_imp) out.importance[i] += d_imp[k];

    if (g[kMx] == 0.0 && g[kMy] == 0.0 && g[kA] == 0.0 && g[kB] == 0.0 && g[kC] == 0.0 &&
        g[kZ] == 0.0) {
      continue;
    }

    const Vec3 mu = vec3_at(rec.centers, i);
    const Vec4 r = vec4_at(rec.rotation, i);
    const Vec3 sc = vec3_at(rec.scales, i);
    const Intermediates it = intermediates(cam, mu, r, sc);

    // conic -> covariance: d cov = -conic * G_conic * conic
    Mat2 conic;
    conic << s.ca, s.cb, s.cb, s.cc;
    Mat2 g_conic;
    g_conic << g[kA], 0.5 * g[kB], 0.5 * g[kB], g[kC];
    const Mat2 g_cov = -conic * g_conic * conic;

    // cov = P Sigma P^T + reg
    const Mat23 g_proj = 2.0 * g_cov * it.proj * it.sigma3;
    const Mat3 g_sigma3 = it.proj.transpose() * g_cov * it.proj;
    const Mat23 g_jac = g_proj * it.cam_rot.transpose();
    d_cam_rot += it.jac.transpose() * g_proj;

    const Real x = it.x_cam.x(), yv = it.x_cam.y(), z = it.x_cam.z();
    const Real fx = cam.fx(), fy = cam.fy();
    const Real iz = 1.0 / z, iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 g_x = Vec3::Zero();
    g_x.x() += g_jac(0, 2) * (-fx * iz2);
    g_x.y() += g_jac(1, 2) * (-fy * iz2);
    g_x.z() += g_jac(0, 0) * (-fx * iz2) + g_jac(0, 2) * (2.0 * fx * x * iz3) +
               g_jac(1, 1) * (-fy * iz2) + g_jac(1, 2) * (2.0 * fy * yv * iz3);
    d_fx += g_jac(0, 0) * iz + g_jac(0, 2) * (-x * iz2);
    d_fy += g_jac(1, 1) * iz + g_jac(1, 2) * (-yv * iz2);

    g_x.x() += g[kMx] * fx * iz;
    g_x.y() += g[kMy] * fy * iz;
    g_x.z() += -(g[kMx] * fx * x + g[kMy] * fy * yv) * iz2 + g[kZ];
    d_fx += g[kMx] * x * iz;
    d_fy += g[kMy] * yv * iz;

    const Vec3 g_mu = it.cam_rot.transpose() * g_x;
    d_cam_t += g_x;
    d_cam_rot += g_x * mu.transpose();

    // Sigma = M M^T, M = R diag(s)
    const Mat3 g_m = 2.0 * g_sigma3 * it.m;
    const Mat3 g_rot = g_m * sc.asDiagonal();
    Vec3 g_s;
    for (int c = 0; c < 3; ++c) g_s[c] = g_m.col(c).dot(it.rot_g.col(c));
    const auto dr = rotation_jacobian(it.q_hat);
    Vec4 g_qhat;
    for (int c = 0; c < 4; ++c) g_qhat[c] = (g_rot.array() * dr[static_cast<std::size_t>(c)].array()).sum();
    const Vec4 g_q = (g_qhat - it.q_hat * it.q_hat.dot(g_qhat)) / it.q_norm;

    for (int c = 0; c < 3; ++c) {
      out.centers[i * 3 + static_cast<std::size_t>(c)] += g_mu[c];
      out.scales[i * 3 + static_cast<std::size_t>(c)] += g_s[c];
    }
    for (int c = 0; c < 4; ++c) out.rotation[i * 4 + static_cast<std::size_t>(c)] += g_q[c];
  }

  const Real qn = rec.cam_q_raw.norm();
  const Vec4 qh = rec.cam_q_raw / qn;
  const auto dr = rotation_jacobian(qh);
  Vec4 g_qhat;
  for (int c = 0; c < 4; ++c) g_qhat[c] = (d_cam_rot.array() * dr[static_cast<std::size_t>(c)].array()).sum();
  const Vec4 g_q = (g_qhat - qh * qh.dot(g_qhat)) / qn;
  for (int c = 0; c < 4; ++c) out.camera[static_cast<std::size_t>(c)] = g_q[c];
  for (int c = 0; c < 3; ++c) out.camera[4 + static_cast<std::size_t>(c)] = d_cam_t[c];
  out.camera[7] = d_fx;
  out.camera[8] = d_fy;
  return out;
}

// ---- importance ------------------------------------------------------------

std::vector<Image> importance_for_masking(std::span<const CameraParams> cams,
                                          const ImageSize& size, const GaussianArrays& field,
                                          const RenderOptions& options) {
  RenderChannels ch;
  ch.rgb = false;
  ch.depth = false;
  ch.importance = true;
  std::vector<Image> out;
  out.reserve(cams.size());
  for (const auto& cam : cams) out.push_back(render(cam, size, field, ch, options).importance);
  return out;
}

std::vector<Image> importance_for_masking(std::span<const CameraParams> cams,
                                          const ImageSize& size,
                                          std::span<const GeometricGaussian> field,
                                          const RenderOptions& options) {
  const GaussianTensors t = from_geometric_gaussians(field);
  return importance_for_masking(cams, size, GaussianArrays::from(t), options);
}

// ---- tape node ---------------------------------------------------------------

RenderTensors render_tensors(const Tensor& camera_row, const GaussianTensors& field,
                             const ImageSize& size, const RenderChannels& channels,
                             const RenderOptions& options) {
  if (camera_row.size() != kCameraDims) {
    throw Error(ErrorCode::kShapeError, "render_tensors camera " + to_string(camera_row.shape()));
  }
  auto cv = camera_row.values();
  const Vec4 q_raw(cv[0], cv[1], cv[2], cv[3]);
  const CameraParams cam(q_raw, Vec3(cv[4], cv[5], cv[6]), cv[7], cv[8]);

  GaussianTensors empty_safe = field;
  const std::size_t n = field.count();
  if (n == 0) {
    empty_safe.centers = Tensor::zeros({0, 3});
    empty_safe.opacity = Tensor::zeros({0, 1});
    empty_safe.rotation = Tensor::zeros({0, 4});
    empty_safe.scales = Tensor::zeros({0, 3});
    if (channels.rgb) empty_safe.colors = Tensor::zeros({0, 3});
    if (channels.semantics) empty_safe.semantics = Tensor::zeros({0, kSemanticDims});
    if (channels.importance) empty_safe.importance = Tensor::zeros({0, 1});
  }
  auto tape = std::make_shared<RenderTape>();
  RenderedMaps maps =
      render_impl(q_raw, cam, size, GaussianArrays::from(empty_safe), channels, options, tape.get());

  // Column layout of the packed output.
  const std::size_t pixels = size.pixels();
  std::size_t cols = 0;
  const std::size_t off_rgb = cols;
  if (channels.rgb) cols += 3;
  const std::size_t off_sem = cols;
  if (channels.semantics) cols += kSemanticDims;
  const std::size_t off_imp = cols;
  if (channels.importance) cols += 1;
  const std::size_t off_depth = cols;
  if (channels.depth) cols += 1;
  const std::size_t off_alpha = cols;
  cols += 1;

  std::vector<Real> packed(pixels * cols);
  for (std::size_t p = 0; p < pixels; ++p) {
    Real* row = &packed[p * cols];
    if (channels.rgb) std::copy_n(&maps.rgb.data[p * 3], 3, row + off_rgb);
    if (channels.semantics)
      std::copy_n(&maps.semantics.data[p * kSemanticDims], kSemanticDims, row + off_sem);
    if (channels.importance) row[off_imp] = maps.importance.data[p];
    if (channels.depth) row[off_depth] = maps.depth.data[p];
    row[off_alpha] = maps.alpha.data[p];
  }

  std::vector<Tensor> inputs = {camera_row, empty_safe.centers, empty_safe.opacity,
                                empty_safe.rotation, empty_safe.scales};
  const std::size_t in_colors = inputs.size();
  if (channels.rgb) inputs.push_back(empty_safe.colors);
  const std::size_t in_sem = inputs.size();
  if (channels.semantics) inputs.push_back(empty_safe.semantics);
  const std::size_t in_imp = inputs.size();
  if (channels.importance) inputs.push_back(empty_safe.importance);

  Tensor out = Tensor::op(
      {pixels, cols}, std::move(packed), inputs,
      [tape, channels, pixels, cols, off_rgb, off_sem, off_imp, off_depth, off_alpha, in_colors,
       in_sem, in_imp](std::span<const Real> g, std::span<const std::span<Real>> gi) {
        std::vector<Real> u_rgb, u_sem, u_imp, u_depth, u_alpha(pixels);
        if (channels.rgb) u_rgb.resize(pixels * 3);
        if (channels.semantics) u_sem.resize(pixels * kSemanticDims);
        if (channels.importance) u_imp.resize(pixels);
        if (channels.depth) u_depth.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) {
          const Real* row = &g[p * cols];
          if (channels.rgb) std::copy_n(row + off_rgb, 3, &u_rgb[p * 3]);
          if (channels.semantics)
            std::copy_n(row + off_sem, kSemanticDims, &u_sem[p * kSemanticDims]);
          if (channels.importance) u_imp[p] = row[off_imp];
          if (channels.depth) u_depth[p] = row[off_depth];
          u_alpha[p] = row[off_alpha];
        }
        RenderUpstream up{u_rgb, u_sem, u_imp, u_depth, u_alpha};
        const RenderGradients rg = render_backward(*tape, up);
        auto acc = [&](std::size_t slot, const std::vector<Real>& src) {
          if (slot >= gi.size() || gi[slot].empty() || src.empty()) return;
          for (std::size_t i = 0; i < src.size(); ++i) gi[slot][i] += src[i];
        };
        if (!gi[0].empty())
          for (std::size_t i = 0; i < kCameraDims; ++i) gi[0][i] += rg.camera[i];
        acc(1, rg.centers);
        acc(2, rg.opacity);
        acc(3, rg.rotation);
        acc(4, rg.scales);
        if (channels.rgb) acc(in_colors, rg.colors);
        if (channels.semantics) acc(in_sem, rg.semantics);
        if (channels.importance) acc(in_imp, rg.importance);
      });

  RenderTensors result;
  if (channels.rgb) result.rgb = slice_cols(out, off_rgb, off_rgb + 3);
  if (channels.semantics) result.semantics = slice_cols(out, off_sem, off_sem + kSemanticDims);
  if (channels.importance) result.importance = slice_cols(out, off_imp, off_imp + 1);
  if (channels.depth) result.depth = slice_cols(out, off_depth, off_depth + 1);
  result.alpha = slice_cols(out, off_alpha, off_alpha + 1);
  return result;
}

}  // namespace dualsplat
