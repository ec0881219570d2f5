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

// Oracle stand-ins for the frozen vision-language and geometry teachers.

#include <cstdint>
#include <vector>

#include "dualsplat/camera.hpp"
#include "dualsplat/image.hpp"
#include "dualsplat/scene.hpp"

namespace dualsplat {

struct PoseNoise {
  Real rotation_degrees = 0.0;  // angle of a random-axis perturbation
  Real translation = 0.0;       // per-axis uniform jitter half-width
  std::uint64_t seed = 0;
};

struct OracleTeachers {
  std::vector<CameraParams> cameras;  // C~, one per source view
  std::vector<Image> points;          // P~, H x W x 3 in the teacher frame
  std::vector<std::vector<std::uint8_t>> valid;  // 1 where gt depth exists
  std::vector<Image> confidence;      // U~, all ones
  std::vector<Image> features;        // F_vlm, H x W x 64
  std::vector<std::vector<Real>> class_codes;  // K + 1 orthonormal codes, background last
};

// (K + 1) x 64 orthonormal rows from a seeded Gaussian matrix.
std::vector<std::vector<Real>> make_class_codes(int count, std::uint64_t seed);

// Teachers for the source views. Points are backprojected through the
// (possibly perturbed) teacher cameras.
OracleTeachers make_teachers(const SyntheticScene& scene, const PoseNoise& noise = {});

// Re-expresses cameras and points in the frame of teacher camera 0.
OracleTeachers canonicalize(const OracleTeachers& teachers);

}  // namespace dualsplat
