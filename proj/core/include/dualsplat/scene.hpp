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

// Synthetic multi-view scenes: labeled boxes and spheres rendered by an exact
// ray caster, independent of the Gaussian rasterizer.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dualsplat/camera.hpp"
#include "dualsplat/image.hpp"

namespace dualsplat {

struct SceneConfig {
  int views = 4;    // source views fed to the network
  int heldout = 3;  // evaluation-only views, interleaved on the arc
  int height = 64;
  int width = 64;
  int classes = 4;     // K; the background takes id K
  int primitives = 4;  // class id of primitive i is i mod K
  Real focal = 60.0;
  Real radius = 3.5;        // camera distance from the cluster center
  Real arc_degrees = 60.0;  // azimuth span covered by all views
  Real elevation_degrees = 15.0;
  Real jitter_degrees = 2.0;
  Real texture = 0.15;  // relative amplitude of the procedural texture
  int supersample = 2;  // per-axis RGB samples per pixel
  Real background = 0.35;  // grey level of pixels no primitive covers
};

enum class PrimitiveKind { kBox, kSphere };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Constant(0.25);  // sphere: radius in x
  Real yaw = 0.0;                           // box rotation about the world y axis
  Vec3 color = Vec3::Constant(0.5);
  int class_id = 0;
};

struct RayHit {
  Real t = 0.0;
  Vec3 normal = Vec3::Zero();
  Vec3 local = Vec3::Zero();  // hit point in the primitive frame
  bool hit = false;
};

RayHit intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir);

struct SyntheticScene {
  SceneConfig config;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;
  // All V + H views in arc order; `source` and `heldout` index into them.
  std::vector<CameraParams> cameras;
  std::vector<std::size_t> source;
  std::vector<std::size_t> heldout;
  std::vector<Image> images;  // H x W x 3 in [0, 1]
  std::vector<Image> depth;   // H x W x 1 camera z, 0 on background
  std::vector<std::vector<int>> labels;  // per pixel class id, K on background

  ImageSize size() const { return {config.width, config.height}; }
  int background_id() const { return config.classes; }
  template <typename T>
  std::vector<T> pick(const std::vector<T>& all, const std::vector<std::size_t>& which) const {
    std::vector<T> out;
    for (std::size_t i : which) out.push_back(all[i]);
    return out;
  }
};

// Throws Error(kConfigError) naming the first violated constraint.
void validate(const SceneConfig& config);
SyntheticScene gen_scene(const SceneConfig& config, std::uint64_t seed);

struct ViewMaps {
  Image rgb;
  Image depth;
  std::vector<int> labels;
};
// Ray-casts one view of the primitives against a uniform grey background.
ViewMaps render_primitives(std::span<const Primitive> prims, const CameraParams& cam,
                           const ImageSize& size, int classes, Real texture, int supersample,
                           Real background = 0.0);

// Camera placed at `center` looking at `target`; world +y is image-down.
CameraParams look_at(const Vec3& center, const Vec3& target, Real focal);

// Scene file: `cam` lines for every view (arc order), `view <index> source|heldout`
// lines, and `prim` lines.
void write_scene(std::ostream& os, const SyntheticScene& scene);
std::string format_camera_line(const CameraParams& cam);
CameraParams parse_camera_line(const std::string& line);
std::string format_primitive_line(const Primitive& prim);
Primitive parse_primitive_line(const std::string& line);

}  // namespace dualsplat
