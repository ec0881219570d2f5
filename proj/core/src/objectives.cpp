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

#include "dualsplat/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

constexpr Real kC1 = 0.01 * 0.01;
constexpr Real kC2 = 0.03 * 0.03;

std::vector<Real> gaussian_window(int k) {
  std::vector<Real> w(static_cast<std::size_t>(k));
  const Real c = (k - 1) * 0.5;
  Real s = 0;
  for (int i = 0; i < k; ++i) s += w[i] = std::exp(-(i - c) * (i - c) / (2 * kSsimSigma * kSsimSigma));
  for (auto& v : w) v /= s;
  return w;
}

// Separable "valid" filtering of one channel plane, and its adjoint.
struct Filter {
  int h, w, kh, kw, oh, ow;
  std::vector<Real> wy, wx;

  Filter(int height, int width)
      : h(height), w(width), kh(std::min(kSsimWindow, height)), kw(std::min(kSsimWindow, width)),
        oh(height - kh + 1), ow(width - kw + 1), wy(gaussian_window(kh)), wx(gaussian_window(kw)) {}

  std::size_t outputs() const { return static_cast<std::size_t>(oh) * ow; }

  std::vector<Real> apply(const std::vector<Real>& in) const {
    std::vector<Real> tmp(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x) {
        Real s = 0;
        for (int k = 0; k < kw; ++k) s += wx[k] * in[y * w + x + k];
        tmp[y * ow + x] = s;
      }
    std::vector<Real> out(outputs(), 0.0);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        Real s = 0;
        for (int k = 0; k < kh; ++k) s += wy[k] * tmp[(y + k) * ow + x];
        out[y * ow + x] = s;
      }
    return out;
  }

  std::vector<Real> adjoint(const std::vector<Real>& g) const {
    std::vector<Real> tmp(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int k = 0; k < kh; ++k) tmp[(y + k) * ow + x] += wy[k] * g[y * ow + x];
    std::vector<Real> out(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < ow; ++x)
        for (int k = 0; k < kw; ++k) out[y * w + x + k] += wx[k] * tmp[y * ow + x];
    return out;
  }
};

std::vector<Real> channel_plane(std::span<const Real> data, std::size_t pixels, std::size_t c,
                                std::size_t channels) {
  std::vector<Real> p(pixels);
  for (std::size_t i = 0; i < pixels; ++i) p[i] = data[i * channels + c];
  return p;
}

struct SsimResult {
  Real value = 0;
  std::vector<Real> grad_a, grad_b;  // d mean-SSIM / d input, HW x C
};

SsimResult ssim_impl(std::span<const Real> a, std::span<const Real> b, int h, int w,
                     std::size_t channels, bool want_grad) {
  const Filter f(h, w);
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  const std::size_t n = f.outputs();
  const Real inv = 1.0 / static_cast<Real>(n * channels);
  SsimResult r;
  if (want_grad) {
    r.grad_a.assign(pixels * channels, 0.0);
    r.grad_b.assign(pixels * channels, 0.0);
  }
  for (std::size_t c = 0; c < channels; ++c) {
    const auto x = channel_plane(a, pixels, c, channels);
    const auto y = channel_plane(b, pixels, c, channels);
    std::vector<Real> xx(pixels), yy(pixels), xy(pixels);
    for (std::size_t i = 0; i < pixels; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = f.apply(x), my = f.apply(y), exx = f.apply(xx), eyy = f.apply(yy),
               exy = f.apply(xy);
    std::vector<Real> g_mx, g_my, g_exx, g_eyy, g_exy;
    if (want_grad) {
      g_mx.resize(n);
      g_my.resize(n);
      g_exx.resize(n);
      g_eyy.resize(n);
      g_exy.resize(n);
    }
    for (std::size_t p = 0; p < n; ++p) {
      const Real a1 = 2 * mx[p] * my[p] + kC1;
      const Real a2 = 2 * (exy[p] - mx[p] * my[p]) + kC2;
      const Real b1 = mx[p] * mx[p] + my[p] * my[p] + kC1;
      const Real b2 = (exx[p] - mx[p] * mx[p]) + (eyy[p] - my[p] * my[p]) + kC2;
      const Real s = a1 * a2 / (b1 * b2);
      r.value += s * inv;
      if (!want_grad) continue;
      const Real bb = b1 * b2;
      g_mx[p] = inv * (2 * my[p] * (a2 - a1) / bb - 2 * mx[p] * s * (1 / b1 - 1 / b2));
      g_my[p] = inv * (2 * mx[p] * (a2 - a1) / bb - 2 * my[p] * s * (1 / b1 - 1 / b2));
      g_exx[p] = -inv * s / b2;
      g_eyy[p] = -inv * s / b2;
      g_exy[p] = inv * 2 * a1 / bb;
    }
    if (!want_grad) continue;
    const auto t_mx = f.adjoint(g_mx), t_my = f.adjoint(g_my), t_exx = f.adjoint(g_exx),
               t_eyy = f.adjoint(g_eyy), t_exy = f.adjoint(g_exy);
    for (std::size_t i = 0; i < pixels; ++i) {
      r.grad_a[i * channels + c] = t_mx[i] + 2 * x[i] * t_exx[i] + y[i] * t_exy[i];
      r.grad_b[i * channels + c] = t_my[i] + 2 * y[i] * t_eyy[i] + x[i] * t_exy[i];
    }
  }
  return r;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeError, std::string(what) + ": " + to_string(a.shape()) +
                                            " vs " + to_string(b.shape()));
  }
}

void require_views(std::size_t a, std::size_t b, const char* what) {
  if (a != b || a == 0) throw Error(ErrorCode::kShapeError, std::string(what) + ": view count mismatch");
}

Tensor accumulate(const std::vector<Tensor>& parts) {
  Tensor total = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  return total;
}

Tensor row_sum(const Tensor& a) { return matmul(a, Tensor::full({a.cols(), 1}, 1.0)); }

}  // namespace

Real ssim(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    throw Error(ErrorCode::kShapeError, "ssim: image size mismatch");
  }
  return ssim_impl(a.data, b.data, a.height, a.width, static_cast<std::size_t>(a.channels), false)
      .value;
}

Tensor ssim(const Tensor& a, const Tensor& b, const ImageSize& size) {
  require_same_shape(a, b, "ssim");
  if (a.rows() != size.pixels()) throw Error(ErrorCode::kShapeError, "ssim: rows != H*W");
  auto r = std::make_shared<SsimResult>(
      ssim_impl(a.values(), b.values(), size.height, size.width, a.cols(), true));
  const Real value = r->value;
  return Tensor::op({1, 1}, {value}, {a, b},
                    [r](std::span<const Real> g, std::span<const std::span<Real>> gi) {
                      for (std::size_t i = 0; i < gi[0].size(); ++i) gi[0][i] += g[0] * r->grad_a[i];
                      for (std::size_t i = 0; i < gi[1].size(); ++i) gi[1][i] += g[0] * r->grad_b[i];
                    });
}

Tensor cosine_rows(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "cosine_rows");
  const std::size_t n = a.rows(), c = a.cols();
  auto x = a.values(), y = b.values();
  std::vector<Real> out(n, 0.0), na(n), nb(n);
  for (std::size_t i = 0; i < n; ++i) {
    Real d = 0, sa = 0, sb = 0;
    for (std::size_t j = 0; j < c; ++j) {
      d += x[i * c + j] * y[i * c + j];
      sa += x[i * c + j] * x[i * c + j];
      sb += y[i * c + j] * y[i * c + j];
    }
    na[i] = std::sqrt(sa);
    nb[i] = std::sqrt(sb);
    if (na[i] > 0 && nb[i] > 0) out[i] = d / (na[i] * nb[i]);
  }
  return Tensor::op({n, 1}, out, {a, b},
                    [a, b, out, na, nb, n, c](std::span<const Real> g,
                                              std::span<const std::span<Real>> gi) {
                      auto x = a.values(), y = b.values();
                      for (std::size_t i = 0; i < n; ++i) {
                        if (!(na[i] > 0 && nb[i] > 0)) continue;
                        const Real inv = 1.0 / (na[i] * nb[i]);
                        for (std::size_t j = 0; j < c; ++j) {
                          const std::size_t k = i * c + j;
                          if (!gi[0].empty())
                            gi[0][k] += g[i] * (y[k] * inv - out[i] * x[k] / (na[i] * na[i]));
                          if (!gi[1].empty())
                            gi[1][k] += g[i] * (x[k] * inv - out[i] * y[k] / (nb[i] * nb[i]));
                        }
                      }
                    });
}

Tensor loss_rgb(std::span<const Tensor> rendered, std::span<const Tensor> target,
                const ImageSize& size) {
  require_views(rendered.size(), target.size(), "loss_rgb");
  std::vector<Tensor> parts;
  for (std::size_t v = 0; v < rendered.size(); ++v) {
    require_same_shape(rendered[v], target[v], "loss_rgb");
    const Tensor l1 = mean(abs(sub(rendered[v], target[v])));
    const Tensor structural = scale(add_scalar(scale(ssim(rendered[v], target[v], size), -1.0), 1.0),
                                    kSsimWeight);
    parts.push_back(add(l1, structural));
  }
  return accumulate(parts);
}

Tensor loss_sem(std::span<const Tensor> rendered, std::span<const Tensor> teacher) {
  require_views(rendered.size(), teacher.size(), "loss_sem");
  std::vector<Tensor> parts;
  for (std::size_t v = 0; v < rendered.size(); ++v) {
    const Tensor cos = cosine_rows(rendered[v], teacher[v]);
    parts.push_back(add_scalar(scale(sum(cos), -1.0), static_cast<Real>(cos.rows())));
  }
  return accumulate(parts);
}

GeoLoss loss_geo(const Tensor& cams_pred, const Tensor& cams_teacher,
                 std::span<const Tensor> points, std::span<const Tensor> confidence,
                 std::span<const Tensor> points_teacher, std::span<const Tensor> confidence_teacher,
                 std::span<const std::vector<std::uint8_t>> valid) {
  require_same_shape(cams_pred, cams_teacher, "loss_geo cameras");
  if (cams_pred.cols() != kCameraDims) throw Error(ErrorCode::kShapeError, "loss_geo: cameras need 9 columns");
  // Align teacher quaternion signs to the prediction (q and -q are the same rotation).
  std::vector<Real> teacher(cams_teacher.values().begin(), cams_teacher.values().end());
  auto pred = cams_pred.values();
  for (std::size_t v = 0; v < cams_pred.rows(); ++v) {
    Real dot = 0;
    for (std::size_t k = 0; k < 4; ++k) dot += pred[v * kCameraDims + k] * teacher[v * kCameraDims + k];
    if (dot < 0)
      for (std::size_t k = 0; k < 4; ++k) teacher[v * kCameraDims + k] = -teacher[v * kCameraDims + k];
  }
  GeoLoss out;
  out.pose = sum(huber(sub(Tensor(cams_teacher.shape(), teacher), cams_pred), kPoseHuberDelta));

  if (points.size() != points_teacher.size() || confidence.size() != confidence_teacher.size() ||
      points.size() != confidence.size()) {
    throw Error(ErrorCode::kShapeError, "loss_geo: view count mismatch");
  }
  std::vector<Tensor> parts{Tensor::scalar(0.0)};
  for (std::size_t v = 0; v < points.size(); ++v) {
    require_same_shape(points[v], points_teacher[v], "loss_geo points");
    require_same_shape(confidence[v], confidence_teacher[v], "loss_geo confidence");
    const Tensor dist = row_norm(sub(points_teacher[v], points[v]));
    Tensor per_pixel = add(mul(confidence_teacher[v].detach(), dist),
                           abs(sub(confidence_teacher[v], confidence[v])));
    if (!valid.empty()) {
      const auto& m = valid[v];
      if (m.size() != per_pixel.rows()) throw Error(ErrorCode::kShapeError, "loss_geo: mask size");
      std::vector<Real> w(m.begin(), m.end());
      per_pixel = mul(per_pixel, Tensor({w.size(), 1}, w));
    }
    parts.push_back(sum(per_pixel));
  }
  out.point = accumulate(parts);
  return out;
}

RecalibLoss loss_recalib(std::span<const Tensor> rgb, std::span<const Tensor> semantics,
                         std::span<const Tensor> points, const Tensor& cams,
                         const ImageSize& size) {
  require_views(rgb.size(), points.size(), "loss_recalib");
  require_views(semantics.size(), points.size(), "loss_recalib");
  if (cams.rows() != points.size()) throw Error(ErrorCode::kShapeError, "loss_recalib: camera rows");
  const Real lo_u = -kReprojectionTolerancePx, hi_u = size.width - 1 + kReprojectionTolerancePx;
  const Real lo_v = -kReprojectionTolerancePx, hi_v = size.height - 1 + kReprojectionTolerancePx;
  const std::size_t pixels = size.pixels();
  RecalibLoss out;
  std::vector<Tensor> geo_parts, sem_parts;
  for (std::size_t v = 0; v < points.size(); ++v) {
    const Tensor cam = slice_rows(cams, v, v + 1);
    const ProjectedPoints proj = project_points(cam, points[v], size);
    auto uv = proj.coords.values();
    std::vector<Real> w(pixels, 0.0);
    std::size_t count = 0;
    for (std::size_t j = 0; j < pixels; ++j) {
      const Real u = uv[j * 2], vv = uv[j * 2 + 1];
      if (proj.valid[j] && u >= lo_u && u <= hi_u && vv >= lo_v && vv <= hi_v) {
        w[j] = 1.0;
        ++count;
      }
    }
    out.valid_counts.push_back(count);
    if (count == 0) {
      geo_parts.push_back(Tensor::scalar(0.0));
      sem_parts.push_back(Tensor::scalar(0.0));
      continue;
    }
    const Real rescale = static_cast<Real>(pixels) / static_cast<Real>(count);
    for (auto& x : w) x *= rescale;
    const Tensor weights({pixels, 1}, w);
    const Tensor warped = bilinear_gather(rgb[v], size, proj.coords);
    geo_parts.push_back(sum(mul(row_sum(abs(sub(rgb[v], warped))), weights)));
    const Tensor warped_sem = bilinear_gather(semantics[v], size, proj.coords);
    const Tensor miss = add_scalar(scale(cosine_rows(warped_sem, semantics[v]), -1.0), 1.0);
    sem_parts.push_back(sum(mul(miss, weights)));
  }
  out.geo = accumulate(geo_parts);
  out.sem = accumulate(sem_parts);
  return out;
}

LossReport total_loss(Real rgb, Real sem, Real pose, Real point, Real recalib_geo,
                      Real recalib_sem, const LossWeights& weights) {
  const std::pair<const char*, Real> named[] = {{"rgb", rgb},
                                                {"sem", sem},
                                                {"pose", pose},
                                                {"point", point},
                                                {"recalib_geo", recalib_geo},
                                                {"recalib_sem", recalib_sem}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) {
      throw Error(ErrorCode::kNonFiniteLoss, std::string("loss term ") + name + " is not finite");
    }
  }
  LossReport r{rgb, sem, pose, point, recalib_geo, recalib_sem, 0.0, weights.pose, weights.point};
  r.total = rgb + sem + (weights.pose * pose + weights.point * point) + (recalib_geo + recalib_sem);
  return r;
}

WeightedLoss total_loss(const LossTerms& t, const LossWeights& weights) {
  auto val = [](const Tensor& x) { return x.defined() ? x.item() : 0.0; };
  WeightedLoss out;
  out.report = total_loss(val(t.rgb), val(t.sem), val(t.pose), val(t.point), val(t.recalib_geo),
                          val(t.recalib_sem), weights);
  std::vector<Tensor> parts;
  if (t.rgb.defined()) parts.push_back(t.rgb);
  if (t.sem.defined()) parts.push_back(t.sem);
  if (t.pose.defined()) parts.push_back(scale(t.pose, weights.pose));
  if (t.point.defined()) parts.push_back(scale(t.point, weights.point));
  if (t.recalib_geo.defined()) parts.push_back(t.recalib_geo);
  if (t.recalib_sem.defined()) parts.push_back(t.recalib_sem);
  out.total = parts.empty() ? Tensor::scalar(0.0) : accumulate(parts);
  return out;
}

void write_loss_jsonl(std::ostream& os, std::int64_t step, const LossReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"step\":%lld,\"rgb\":%.17g,\"sem\":%.17g,\"pose\":%.17g,\"point\":%.17g,"
                "\"recalib_geo\":%.17g,\"recalib_sem\":%.17g,\"total\":%.17g}\n",
                static_cast<long long>(step), r.rgb, r.sem, r.pose, r.point, r.recalib_geo,
                r.recalib_sem, r.total);
  os << buf;
}

}  // namespace dualsplat
