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


#include "dualsplat/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dualsplat/error.hpp"

namespace dualsplat {

Real psnr(const Image& a, const Image& b) {
  if (a.data.size() != b.data.size() || a.data.empty())
    throw Error(ErrorCode::kShapeError, "psnr: image shapes differ");
  Real se = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) se += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  const Real mse = se / static_cast<Real>(a.data.size());
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

std::vector<int> decode_semantics(const Image& features, std::span<const std::vector<Real>> codes) {
  std::vector<int> out(features.pixels(), 0);
  for (std::size_t p = 0; p < features.pixels(); ++p) {
    const auto f = features.pixel(p);
    Real fn = 0;
    for (Real x : f) fn += x * x;
    fn = std::sqrt(fn);
    Real best = -2.0;
    for (std::size_t k = 0; k < codes.size(); ++k) {
      Real dot = 0, cn = 0;
      for (std::size_t c = 0; c < f.size(); ++c) {
        dot += f[c] * codes[k][c];
        cn += codes[k][c] * codes[k][c];
      }
      const Real cos = fn > 0 ? dot / (fn * std::sqrt(cn)) : 0.0;
      if (cos > best) {
        best = cos;
        out[p] = static_cast<int>(k);
      }
    }
  }
  return out;
}

SegmentationScores segmentation_scores(std::span<const std::vector<int>> predicted,
                                       std::span<const std::vector<int>> truth, int num_classes) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::kShapeError, "segmentation: view counts");
  const auto k = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> inter(k, 0), uni(k, 0);
  std::size_t correct = 0, total = 0;
  for (std::size_t v = 0; v < truth.size(); ++v) {
    if (predicted[v].size() != truth[v].size()) throw Error(ErrorCode::kShapeError, "segmentation: sizes");
    for (std::size_t p = 0; p < truth[v].size(); ++p) {
      const auto a = static_cast<std::size_t>(predicted[v][p]);
      const auto b = static_cast<std::size_t>(truth[v][p]);
      if (a >= k || b >= k) throw Error(ErrorCode::kShapeError, "segmentation: class id out of range");
      ++total;
      if (a == b) {
        ++correct;
        ++inter[a];
        ++uni[a];
      } else {
        ++uni[a];
        ++uni[b];
      }
    }
  }
  SegmentationScores s;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (uni[c] == 0) continue;
    ++present;
    s.miou += static_cast<Real>(inter[c]) / static_cast<Real>(uni[c]);
  }
  s.miou = present ? s.miou / static_cast<Real>(present) : 0.0;
  s.pix_acc = total ? static_cast<Real>(correct) / static_cast<Real>(total) : 0.0;
  return s;
}

std::optional<DepthScores> depth_scores(std::span<const Image> predicted,
                                        std::span<const Image> reference) {
  DepthScores s;
  std::size_t inliers = 0;
  for (std::size_t v = 0; v < reference.size(); ++v) {
    for (std::size_t i = 0; i < reference[v].data.size(); ++i) {
      const Real ref = reference[v].data[i], d = predicted[v].data[i];
      if (!(ref > 0) || !(d > 0)) continue;
      s.abs_rel += std::abs(d - ref) / ref;
      inliers += std::max(d / ref, ref / d) < kDepthInlierRatio;
      ++s.count;
    }
  }
  if (s.count == 0) return std::nullopt;
  s.abs_rel /= static_cast<Real>(s.count);
  s.tau = static_cast<Real>(inliers) / static_cast<Real>(s.count);
  return s;
}

Real pose_auc(std::span<const Real> errors, Real threshold) {
  if (errors.empty()) return 0.0;
  Real acc = 0;
  for (Real e : errors) acc += std::max(0.0, 1.0 - e / threshold);
  return acc / static_cast<Real>(errors.size());
}

std::vector<Real> pairwise_rotation_errors(std::span<const CameraParams> predicted,
                                           std::span<const CameraParams> reference) {
  if (predicted.size() != reference.size()) throw Error(ErrorCode::kShapeError, "pose: view counts");
  std::vector<Real> out;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    for (std::size_t j = i + 1; j < predicted.size(); ++j)
      out.push_back(pairwise_rotation_error(predicted[i], predicted[j], reference[i], reference[j]));
  return out;
}

}  // namespace dualsplat
