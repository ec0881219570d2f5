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


#include "dualsplat/gradcheck_suite.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "dualsplat/camera.hpp"
#include "dualsplat/network.hpp"
#include "dualsplat/objectives.hpp"
#include "dualsplat/rasterizer.hpp"

namespace dualsplat {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * static_cast<Real>(g_() >> 11) * 0x1.0p-53; }
  Tensor tensor(Shape s, Real lo, Real hi, bool grad = true) {
    std::vector<Real> v(s.size());
    for (auto& x : v) x = uniform(lo, hi);
    return Tensor(s, v, grad);
  }
  // Smooth image-like values, so bilinear and SSIM inputs are not white noise.
  Tensor smooth(const ImageSize& size, std::size_t channels, bool grad = true) {
    std::vector<Real> v(size.pixels() * channels);
    for (std::size_t c = 0; c < channels; ++c) {
      const Real a = uniform(-1, 1), b = uniform(-1, 1), p = uniform(-1, 1), q = uniform(-1, 1);
      for (int y = 0; y < size.height; ++y)
        for (int x = 0; x < size.width; ++x)
          v[(static_cast<std::size_t>(y) * size.width + x) * channels + c] =
              0.5 + 0.25 * a * std::sin(0.3 * x + p) + 0.25 * b * std::cos(0.25 * y + q);
    }
    return Tensor({size.pixels(), channels}, v, grad);
  }

 private:
  std::mt19937_64 g_;
};

Tensor probe(Rng& rng, const Tensor& t, Real weight = 1.0) {
  std::vector<Real> w(t.values().size());
  for (auto& x : w) x = weight * rng.uniform(-1, 1);
  return sum(mul(t, Tensor(t.shape(), w)));
}

GradCheckCase finish(std::string name, Real tol, const GradCheckResult& r,
                     const std::vector<std::string>& names) {
  GradCheckCase c{std::move(name), tol, r, {}};
  if (r.param < names.size()) c.worst_param = names[r.param];
  return c;
}

}  // namespace

GradCheckCase gradcheck_rasterizer(std::uint64_t seed) {
  Rng rng(seed + 101);
  const ImageSize size{14, 12};
  GradCheckResult worst;
  std::vector<std::string> names{"camera",  "centers",   "opacity",   "rotation",
                                 "scales",  "colors",    "semantics", "importance"};
  for (int trial = 0; trial < 3; ++trial) {
    const std::size_t n = 5;
    std::vector<Real> c, r;
    for (std::size_t i = 0; i < n; ++i) {
      c.insert(c.end(), {rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(1.5, 4.0)});
      Vec4 q(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
      q.normalize();
      r.insert(r.end(), {q[0], q[1], q[2], q[3]});
    }
    Tensor centers({n, 3}, c, true), rot({n, 4}, r, true);
    Tensor opacity = rng.tensor({n, 1}, 0.05, 0.9), scales = rng.tensor({n, 3}, 0.03, 0.3);
    Tensor colors = rng.tensor({n, 3}, 0, 1), sem = rng.tensor({n, kSemanticDims}, -1, 1);
    Tensor imp = rng.tensor({n, 1}, 0.2, 2.0);
    Tensor cam({1, 9}, {0.99, 0.03, -0.05, 0.02, 0.04, -0.03, 0.1, 22, 24}, true);
    std::vector<Tensor> w;
    for (std::size_t ch : {3u, 64u, 1u, 1u, 1u}) w.push_back(rng.tensor({size.pixels(), ch}, -1, 1, false));
    auto f = [&] {
      const GaussianTensors g{centers, opacity, rot, scales, colors, sem, imp};
      const RenderTensors r = render_tensors(cam, g, size, RenderChannels{true, true, true, true});
      return add(add(add(sum(mul(r.rgb, w[0])), sum(mul(r.semantics, w[1]))),
                     add(sum(mul(r.importance, w[2])), sum(mul(r.depth, w[3])))),
                 sum(mul(r.alpha, w[4])));
    };
    const auto res = grad_check(f, {cam, centers, opacity, rot, scales, colors, sem, imp});
    if (res.max_rel_error >= worst.max_rel_error) {
      const std::size_t checked = worst.checked + res.checked;
      worst = res;
      worst.checked = checked;
    } else {
      worst.checked += res.checked;
    }
  }
  return finish("rasterizer", 1e-3, worst, names);
}

GradCheckCase gradcheck_bilinear(std::uint64_t seed) {
  Rng rng(seed + 202);
  const ImageSize size{7, 6};
  Tensor image = rng.smooth(size, 3);
  std::vector<Real> c;
  for (int i = 0; i < 12; ++i) {
    // Stay clear of integer coordinates, where the sampler has kinks.
    c.push_back(std::floor(rng.uniform(0, 6)) + rng.uniform(0.1, 0.9));
    c.push_back(std::floor(rng.uniform(0, 5)) + rng.uniform(0.1, 0.9));
  }
  Tensor coords({12, 2}, c, true);
  const Tensor w = rng.tensor({12, 3}, -1, 1, false);
  const auto r = grad_check([&] { return sum(mul(bilinear_gather(image, size, coords), w)); },
                            {image, coords});
  return finish("bilinear_sampler", 1e-4, r, {"image", "coords"});
}

GradCheckCase gradcheck_ssim(std::uint64_t seed) {
  Rng rng(seed + 303);
  const ImageSize size{13, 12};
  Tensor a = rng.smooth(size, 2), b = rng.tensor({size.pixels(), 2}, 0, 1);
  const auto r = grad_check([&] { return ssim(a, b, size); }, {a, b});
  return finish("ssim", 1e-4, r, {"a", "b"});
}

GradCheckCase gradcheck_loss_rgb(std::uint64_t seed) {
  Rng rng(seed + 404);
  const ImageSize size{12, 11};
  Tensor a = rng.smooth(size, 3), b = rng.smooth(size, 3, false);
  const std::vector<Tensor> target{b};
  const auto r = grad_check([&] { return loss_rgb(std::vector<Tensor>{a}, target, size); }, {a});
  return finish("loss_rgb", 1e-3, r, {"rendered"});
}

GradCheckCase gradcheck_loss_sem(std::uint64_t seed) {
  Rng rng(seed + 505);
  Tensor f = rng.tensor({20, kSemanticDims}, -1, 1);
  const std::vector<Tensor> t{rng.tensor({20, kSemanticDims}, -1, 1, false)};
  const auto r = grad_check([&] { return loss_sem(std::vector<Tensor>{f}, t); }, {f});
  return finish("loss_sem", 1e-4, r, {"rendered"});
}

GradCheckCase gradcheck_loss_geo(std::uint64_t seed) {
  Rng rng(seed + 606);
  Tensor cams = rng.tensor({2, 9}, -1, 1);
  const Tensor cams_t = rng.tensor({2, 9}, -1, 1, false);
  std::vector<Tensor> p, u, pt, ut;
  for (int v = 0; v < 2; ++v) {
    p.push_back(rng.tensor({5, 3}, -1, 1));
    u.push_back(rng.tensor({5, 1}, 1, 3));
    pt.push_back(rng.tensor({5, 3}, -1, 1, false));
    ut.push_back(rng.tensor({5, 1}, 1, 3, false));
  }
  std::vector<Tensor> params{cams};
  params.insert(params.end(), p.begin(), p.end());
  params.insert(params.end(), u.begin(), u.end());
  const auto r = grad_check(
      [&] {
        const GeoLoss l = loss_geo(cams, cams_t, p, u, pt, ut);
        return add(l.pose, l.point);
      },
      params);
  return finish("loss_geo", 1e-4, r, {"cameras", "points0", "points1", "conf0", "conf1"});
}

GradCheckCase gradcheck_loss_recalib(std::uint64_t seed) {
  Rng rng(seed + 707);
  const ImageSize size{8, 7};
  Tensor rgb = rng.smooth(size, 3), sem = rng.tensor({56, kSemanticDims}, -1, 1);
  std::vector<Real> pts;
  for (int i = 0; i < 56; ++i)
    pts.insert(pts.end(), {rng.uniform(-0.25, 0.25) + 0.011, rng.uniform(-0.25, 0.25) + 0.013,
                           2.0 + rng.uniform(-0.25, 0.25)});
  Tensor points({56, 3}, pts, true);
  Tensor cams({1, 9}, {0.99, 0.02, -0.03, 0.01, 0.05, -0.02, 0.1, 9, 10}, true);
  const auto r = grad_check(
      [&] {
        const RecalibLoss l = loss_recalib(std::vector<Tensor>{rgb}, std::vector<Tensor>{sem},
                                           std::vector<Tensor>{points}, cams, size);
        return add(l.geo, l.sem);
      },
      {rgb, sem, points, cams});
  return finish("loss_recalib", 1e-3, r, {"rgb", "semantics", "points", "cameras"});
}

GradCheckCase gradcheck_network_micro(std::uint64_t seed) {
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
  c.seed = seed + 3;
  const ModelParams params = init_params(c);
  Rng rng(seed + 808);
  std::vector<Image> images;
  for (int v = 0; v < c.views; ++v) {
    const Tensor t = rng.smooth(c.image_size(), 3, false);
    Image img(c.image_height, c.image_width, 3);
    img.data.assign(t.values().begin(), t.values().end());
    images.push_back(std::move(img));
  }

  // Scalar touching every head and a render of the appearance field.
  auto loss = [&] {
    ForwardOptions o;
    o.mask_seed = seed + 5;
    const auto out = forward(params, c, images, o);
    Rng w(seed + 909);
    Tensor total = probe(w, out.coarse.cameras);
    for (const GaussianTensors* f : {&out.coarse.geo, &out.fine.semantic, &out.fine.appearance}) {
      total = add(total, probe(w, f->centers));
      total = add(total, probe(w, f->opacity));
      total = add(total, probe(w, f->rotation));
      total = add(total, probe(w, f->scales));
      if (f->colors.defined()) total = add(total, probe(w, f->colors));
      if (f->semantics.defined()) total = add(total, probe(w, f->semantics, 0.1));
    }
    total = add(total, probe(w, out.coarse.geo.importance));
    total = add(total, probe(w, out.fine.anchor_centers));
    for (std::size_t v = 0; v < out.point_camera.points.size(); ++v) {
      total = add(total, probe(w, out.point_camera.points[v], 0.05));
      total = add(total, probe(w, out.point_camera.confidence[v], 0.05));
    }
    total = add(total, probe(w, out.point_camera.cameras));
    RenderOptions ro;
    ro.workers = 1;
    const auto r = render_tensors(slice_rows(out.point_camera.cameras, 0, 1), out.fine.appearance,
                                  c.image_size(), RenderChannels{true, true, false, true}, ro);
    total = add(total, probe(w, r.rgb));
    total = add(total, probe(w, r.semantics, 0.1));
    return add(total, probe(w, r.depth, 0.1));
  };

  // The image-bounds cull makes the render piecewise smooth; a step of 1e-5
  // already straddles cull events for a few hundred splats, 1e-6 does not.
  GradCheckOptions go;
  go.step = 1e-6;
  go.floor = 1e-5;
  go.max_coords_per_param = 6;
  go.seed = seed + 8;
  const auto r = grad_check(loss, params.tensors(), go);
  std::vector<std::string> names;
  for (const auto& [name, t] : params.named) names.push_back(name);
  return finish("network_micro", 1e-3, r, names);
}

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed) {
  return {gradcheck_rasterizer(seed), gradcheck_bilinear(seed),    gradcheck_ssim(seed),
          gradcheck_loss_rgb(seed),   gradcheck_loss_sem(seed),    gradcheck_loss_geo(seed),
          gradcheck_loss_recalib(seed), gradcheck_network_micro(seed)};
}

void write_gradcheck_jsonl(std::ostream& os, const GradCheckCase& c) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\"case\":\"%s\",\"max_rel_error\":%.17g,\"tolerance\":%.17g,\"checked\":%zu,"
                "\"worst_param\":\"%s\",\"worst_index\":%zu,\"analytic\":%.17g,\"numeric\":%.17g,"
                "\"pass\":%s}\n",
                c.name.c_str(), c.result.max_rel_error, c.tolerance, c.result.checked,
                c.worst_param.c_str(), c.result.index, c.result.analytic, c.result.numeric,
                c.passed() ? "true" : "false");
  os << buf;
}

}  // namespace dualsplat
