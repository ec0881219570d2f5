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

#include "dualsplat/gaussian_field.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

Real logistic(Real x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void check_fan_out(std::size_t parents, std::size_t records) {
  if (records != parents * kFanOut) {
    throw Error(ErrorCode::kFanOutMismatch, std::to_string(records) + " offset records for " +
                                                std::to_string(parents) + " parents (need " +
                                                std::to_string(kFanOut) + " each)");
  }
}

RenderGaussian make_child(const Vec3& base, const OffsetRecord& rec, GaussianLevel level,
                          Real max_scale) {
  const ActivatedFeature a = unpack_geometric_feature(rec.attrs, max_scale);
  RenderGaussian g;
  g.center = base + rec.delta;
  g.color = a.color;
  g.sigma = a.sigma;
  g.r = a.r;
  g.s = a.s;
  g.gamma = rec.gamma;
  g.level = level;
  return g;
}

}  // namespace

ActivatedFeature unpack_geometric_feature(std::span<const Real> eps, Real max_scale) {
  if (eps.size() != kGeometricFeatureDims) {
    throw Error(ErrorCode::kShapeError,
                "geometric feature needs 11 values, got " + std::to_string(eps.size()));
  }
  for (Real e : eps) {
    if (!std::isfinite(e)) throw Error(ErrorCode::kNonFiniteInput, "geometric feature");
  }
  ActivatedFeature out;
  out.sigma = logistic(eps[0]);
  const Vec4 q(eps[1], eps[2], eps[3], eps[4]);
  const Real n = q.norm();
  if (!(n > 1e-12)) throw Error(ErrorCode::kDegenerateRotation, "rotation slice has zero norm");
  out.r = q / n;
  for (int k = 0; k < 3; ++k) {
    out.s[k] = std::clamp(std::exp(eps[5 + static_cast<std::size_t>(k)]), kMinScale, max_scale);
    out.color[k] = logistic(eps[8 + static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<RenderGaussian> expand_anchors_to_semantic(std::span<const AnchorGaussian> anchors,
                                                       std::span<const OffsetRecord> offsets,
                                                       Real max_scale) {
  check_fan_out(anchors.size(), offsets.size());
  std::vector<RenderGaussian> out;
  out.reserve(offsets.size());
  for (std::size_t a = 0; a < anchors.size(); ++a)
    for (std::size_t k = 0; k < kFanOut; ++k)
      out.push_back(make_child(anchors[a].mu, offsets[a * kFanOut + k], GaussianLevel::kSemantic,
                               max_scale));
  return out;
}

std::vector<RenderGaussian> expand_semantic_to_appearance(std::span<const RenderGaussian> semantic,
                                                          std::span<const OffsetRecord> offsets,
                                                          FineSemantics semantics,
                                                          Real max_scale) {
  check_fan_out(semantic.size(), offsets.size());
  std::vector<RenderGaussian> out;
  out.reserve(offsets.size());
  for (std::size_t p = 0; p < semantic.size(); ++p) {
    for (std::size_t k = 0; k < kFanOut; ++k) {
      RenderGaussian g = make_child(semantic[p].center, offsets[p * kFanOut + k],
                                    GaussianLevel::kAppearance, max_scale);
      if (semantics == FineSemantics::kCopyParent) g.gamma = semantic[p].gamma;
      out.push_back(g);
    }
  }
  return out;
}

// ---- tensors ---------------------------------------------------------------

ActivatedTensors activate_geometric_features(const Tensor& raw, Real max_scale) {
  if (raw.cols() != kGeometricFeatureDims) {
    throw Error(ErrorCode::kShapeError, "activate_geometric_features: " + to_string(raw.shape()));
  }
  ActivatedTensors out;
  out.opacity = sigmoid(slice_cols(raw, 0, 1));
  out.rotation = normalize_rows(slice_cols(raw, 1, 5));
  out.scales = clamp(exp(slice_cols(raw, 5, 8)), kMinScale, max_scale);
  out.colors = sigmoid(slice_cols(raw, 8, 11));
  return out;
}

GaussianTensors expand_level(const Tensor& parent_centers, const Tensor& deltas,
                             const Tensor& raw_attrs, const Tensor& semantics, Real max_scale) {
  const std::size_t n = parent_centers.rows();
  check_fan_out(n, deltas.rows());
  check_fan_out(n, raw_attrs.rows());
  if (semantics.defined()) check_fan_out(n, semantics.rows());
  ActivatedTensors a = activate_geometric_features(raw_attrs, max_scale);
  GaussianTensors g;
  g.centers = add(repeat_rows(parent_centers, kFanOut), deltas);
  g.opacity = a.opacity;
  g.rotation = a.rotation;
  g.scales = a.scales;
  g.colors = a.colors;
  g.semantics = semantics;
  return g;
}

GaussianTensors concat_fields(std::span<const GaussianTensors> fields) {
  GaussianTensors out;
  auto join = [&](Tensor GaussianTensors::*member) {
    std::vector<Tensor> parts;
    for (const auto& f : fields) {
      if ((f.*member).defined()) parts.push_back(f.*member);
    }
    if (parts.empty()) return Tensor{};
    if (parts.size() != fields.size()) {
      throw Error(ErrorCode::kShapeError, "concat_fields: attribute defined on a subset of fields");
    }
    return parts.size() == 1 ? parts[0] : concat_rows(parts);
  };
  out.centers = join(&GaussianTensors::centers);
  out.opacity = join(&GaussianTensors::opacity);
  out.rotation = join(&GaussianTensors::rotation);
  out.scales = join(&GaussianTensors::scales);
  out.colors = join(&GaussianTensors::colors);
  out.semantics = join(&GaussianTensors::semantics);
  out.importance = join(&GaussianTensors::importance);
  return out;
}

std::vector<RenderGaussian> to_render_gaussians(const GaussianTensors& field, GaussianLevel level) {
  const std::size_t n = field.count();
  std::vector<RenderGaussian> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    RenderGaussian& g = out[i];
    for (int k = 0; k < 3; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      g.center[k] = field.centers.values()[i * 3 + kk];
      g.s[k] = field.scales.values()[i * 3 + kk];
      if (field.colors.defined()) g.color[k] = field.colors.values()[i * 3 + kk];
    }
    for (int k = 0; k < 4; ++k) g.r[k] = field.rotation.values()[i * 4 + static_cast<std::size_t>(k)];
    g.sigma = field.opacity.values()[i];
    if (field.semantics.defined())
      std::copy_n(field.semantics.values().data() + i * kSemanticDims, kSemanticDims, g.gamma.begin());
    g.level = level;
  }
  return out;
}

GaussianTensors from_render_gaussians(std::span<const RenderGaussian> gaussians) {
  const std::size_t n = gaussians.size();
  std::vector<Real> c(n * 3), o(n), r(n * 4), s(n * 3), col(n * 3), sem(n * kSemanticDims);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = gaussians[i];
    for (int k = 0; k < 3; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      c[i * 3 + kk] = g.center[k];
      s[i * 3 + kk] = g.s[k];
      col[i * 3 + kk] = g.color[k];
    }
    for (int k = 0; k < 4; ++k) r[i * 4 + static_cast<std::size_t>(k)] = g.r[k];
    o[i] = g.sigma;
    std::copy(g.gamma.begin(), g.gamma.end(), sem.begin() + static_cast<std::ptrdiff_t>(i * kSemanticDims));
  }
  GaussianTensors t;
  t.centers = Tensor({n, 3}, std::move(c));
  t.opacity = Tensor({n, 1}, std::move(o));
  t.rotation = Tensor({n, 4}, std::move(r));
  t.scales = Tensor({n, 3}, std::move(s));
  t.colors = Tensor({n, 3}, std::move(col));
  t.semantics = Tensor({n, kSemanticDims}, std::move(sem));
  return t;
}

GaussianTensors from_geometric_gaussians(std::span<const GeometricGaussian> gaussians) {
  const std::size_t n = gaussians.size();
  std::vector<Real> c(n * 3), o(n), r(n * 4), s(n * 3), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = gaussians[i];
    for (int k = 0; k < 3; ++k) {
      c[i * 3 + static_cast<std::size_t>(k)] = g.mu[k];
      s[i * 3 + static_cast<std::size_t>(k)] = g.s[k];
    }
    for (int k = 0; k < 4; ++k) r[i * 4 + static_cast<std::size_t>(k)] = g.r[k];
    o[i] = g.sigma;
    b[i] = g.beta;
  }
  GaussianTensors t;
  t.centers = Tensor({n, 3}, std::move(c));
  t.opacity = Tensor({n, 1}, std::move(o));
  t.rotation = Tensor({n, 4}, std::move(r));
  t.scales = Tensor({n, 3}, std::move(s));
  t.importance = Tensor({n, 1}, std::move(b));
  return t;
}

// ---- text format -----------------------------------------------------------

const char* level_name(GaussianLevel level) {
  return level == GaussianLevel::kSemantic ? "semantic" : "appearance";
}

void write_gaussian_line(std::ostream& os, const RenderGaussian& g, bool with_semantics) {
  std::ostringstream line;
  line.imbue(std::locale::classic());
  line << std::setprecision(9) << "g " << level_name(g.level);
  for (int k = 0; k < 3; ++k) line << ' ' << g.center[k];
  line << ' ' << g.sigma;
  for (int k = 0; k < 4; ++k) line << ' ' << g.r[k];
  for (int k = 0; k < 3; ++k) line << ' ' << g.s[k];
  for (int k = 0; k < 3; ++k) line << ' ' << g.color[k];
  if (with_semantics)
    for (Real v : g.gamma) line << ' ' << v;
  os << line.str() << '\n';
}

RenderGaussian parse_gaussian_line(const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::string tag, level;
  in >> tag >> level;
  if (tag != "g") throw Error(ErrorCode::kIoError, "not a gaussian line: " + text);
  RenderGaussian g;
  if (level == "semantic") {
    g.level = GaussianLevel::kSemantic;
  } else if (level == "appearance") {
    g.level = GaussianLevel::kAppearance;
  } else {
    throw Error(ErrorCode::kIoError, "unknown gaussian level '" + level + "'");
  }
  std::vector<Real> v;
  Real x;
  while (in >> x) v.push_back(x);
  if (!in.eof()) throw Error(ErrorCode::kIoError, "malformed number in: " + text);
  if (v.size() != 14 && v.size() != 14 + kSemanticDims) {
    throw Error(ErrorCode::kIoError, "gaussian line has " + std::to_string(v.size()) + " values");
  }
  g.center = Vec3(v[0], v[1], v[2]);
  g.sigma = v[3];
  g.r = Vec4(v[4], v[5], v[6], v[7]);
  g.s = Vec3(v[8], v[9], v[10]);
  g.color = Vec3(v[11], v[12], v[13]);
  if (v.size() > 14) std::copy(v.begin() + 14, v.end(), g.gamma.begin());
  return g;
}

}  // namespace dualsplat
