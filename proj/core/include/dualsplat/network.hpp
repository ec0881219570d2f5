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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dualsplat/autodiff.hpp"
#include "dualsplat/camera.hpp"
#include "dualsplat/gaussian_field.hpp"
#include "dualsplat/masking.hpp"
#include "dualsplat/rasterizer.hpp"

namespace dualsplat {

struct ModelConfig {
  int image_height = 64;
  int image_width = 64;
  int patch = 8;
  int dim = 64;
  int heads = 4;
  int enc_depth = 4;
  int dec_depth = 2;
  int ffn_hidden = 128;
  int head_hidden = 64;
  int views = 4;
  int gaussians_per_view = 256;  // N_g

  Real focal_prior = 64.0;
  // Canonical cube for predicted positions: center +- half_extent.
  Vec3 scene_center = Vec3::Zero();
  Real scene_half_extent = 1.0;
  Real semantic_offset_radius = 0.2;
  Real appearance_offset_radius = 0.08;
  Real max_scale = kDefaultMaxScale;
  // Initial Gaussian scales per level (bias of the log-scale outputs).
  Real geo_init_scale = 0.1;
  Real semantic_init_scale = 0.08;
  Real appearance_init_scale = 0.04;
  FineSemantics fine_semantics = FineSemantics::kFresh;
  std::uint64_t seed = 0;

  std::size_t patches() const {
    return static_cast<std::size_t>(image_height / patch) * (image_width / patch);
  }
  ImageSize image_size() const { return {image_width, image_height}; }
};

struct Linear {
  Tensor w, b;
  Tensor operator()(const Tensor& x) const { return linear(x, w, b); }
};

struct Mlp {
  Linear l1, l2;
  Tensor operator()(const Tensor& x) const { return l2(gelu(l1(x))); }
};

struct Block {
  Tensor norm1, wq, wk, wv, wo;
  Tensor norm2;
  Linear ff1, ff2;
};

struct ModelParams {
  Linear embed;            // 3 p^2 -> D
  Tensor view_embed;       // V x D
  Tensor cam_tokens;       // V x D (T_cam)
  Tensor gauss_tokens;     // N_g x D shared base of T_coarse
  Tensor mask_token;       // 1 x D (T_mask)
  std::vector<Block> enc_blocks, dec_blocks;
  Tensor enc_norm, dec_norm;
  Mlp coarse_camera_head;  // D -> 9
  Mlp coarse_gauss_head;   // D + 9 -> 12
  Mlp anchor_head;         // D -> 3 + 11 + 64
  Mlp semantic_head;       // D + 11 + 64 -> 10 (3 + 11 + 64)
  Tensor record_embed;     // 10 x D, appearance children
  Mlp appearance_head;     // D -> 10 (3 + 11 [+ 64])
  Linear point_head;       // D -> p^2 4
  Mlp camera_head;         // D -> 9 delta

  // Every parameter with a stable dotted name, in a fixed order.
  std::vector<std::pair<std::string, Tensor>> named;

  std::vector<Tensor> tensors() const;
};

ModelParams init_params(const ModelConfig& config);

// Patch tokens plus 2-D sinusoidal position code plus view embedding.
Tensor position_code(const ModelConfig& config);  // N_p x D constant

struct EncodedState {
  std::vector<Tensor> y_vis;  // per view, N_vis x D
  Tensor cam;                 // V x D
  Tensor gauss;               // V N_g x D
};

Tensor run_blocks(const std::vector<Block>& blocks, const Tensor& x, int heads);

EncodedState encode(const ModelParams& params, const ModelConfig& config, const TokenGrid& tokens,
                    const MaskSet& masks);

struct CoarseOutputs {
  Tensor cameras;         // V x 9 (C_coarse)
  GaussianTensors geo;    // V N_g Gaussians with importance (G_geo)
};

CoarseOutputs coarse_heads(const ModelParams& params, const ModelConfig& config,
                           const Tensor& cam, const Tensor& gauss);

struct DecodedState {
  Tensor grid;   // V N_p x D, view-major, row-major patches
  Tensor cam;    // V x D
  Tensor gauss;  // V N_g x D
  std::size_t mask_slots = 0;  // grid rows filled from T_mask
};

DecodedState decode(const ModelParams& params, const ModelConfig& config, const EncodedState& enc,
                    const MaskSet& masks);

struct FineOutputs {
  Tensor anchor_centers;   // V N_g x 3
  Tensor anchor_features;  // V N_g x 11 (epsilon)
  Tensor anchor_semantics; // V N_g x 64 (gamma)
  GaussianTensors semantic;
  GaussianTensors appearance;
};

FineOutputs fine_heads(const ModelParams& params, const ModelConfig& config, const Tensor& gauss);

struct PointCameraOutputs {
  std::vector<Tensor> points;      // per view, HW x 3
  std::vector<Tensor> confidence;  // per view, HW x 1, >= 1
  Tensor cameras;                  // V x 9 (C_final)
};

PointCameraOutputs point_and_camera_heads(const ModelParams& params, const ModelConfig& config,
                                          const Tensor& grid, const Tensor& cam,
                                          const Tensor& coarse_cameras);

struct ForwardOutputs {
  MaskSet masks;
  EncodedState encoded;
  CoarseOutputs coarse;
  std::vector<Image> importance;  // per view J rendered from G_geo at C_coarse
  DecodedState decoded;
  FineOutputs fine;
  PointCameraOutputs point_camera;
};

struct ForwardOptions {
  Real rho_e = 0.5;
  Real rho_d = 0.5;
  std::uint64_t mask_seed = 0;
  std::size_t workers = 1;
};

// Full pipeline on V source images.
ForwardOutputs forward(const ModelParams& params, const ModelConfig& config,
                       std::span<const Image> images, const ForwardOptions& options);

// USPCKPT1 checkpoint: magic, u32 record count, records of
// (u32 name length, name, u32 rows, u32 cols, f32 LE data), then u64 length
// and the config text.
void save_checkpoint(std::ostream& os, const ModelParams& params, const std::string& config_text);
// Loads values into `params` (names and shapes must match). Returns the
// config text block.
std::string load_checkpoint(std::istream& is, ModelParams& params);
// Config text block only, skipping the parameter records.
std::string checkpoint_config(std::istream& is);

}  // namespace dualsplat
