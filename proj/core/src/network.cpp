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

#include "dualsplat/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

constexpr std::size_t kCoarseGaussOut = 12;  // mu 3, sigma 1, rotation 4, scale 3, beta 1
constexpr std::size_t kRecordGeo = 3 + kGeometricFeatureDims;
constexpr std::size_t kAnchorOut = 3 + kGeometricFeatureDims + kSemanticDims;
// Initial spread of raw position outputs: anchors start scattered over the
// cube instead of collapsed at its center, and children around their parent.
constexpr Real kPositionInitSpread = 0.8;
constexpr Real kOffsetInitSpread = 0.5;

class Init {
 public:
  explicit Init(std::uint64_t seed) : rng_(seed) {}

  Tensor normal(Shape s, Real stddev) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<Real> v(s.size());
    for (auto& x : v) x = stddev * d(rng_);
    return Tensor(s, v, true);
  }
  static Tensor zeros(Shape s) { return Tensor::zeros(s, true); }
  static Tensor ones(Shape s) { return Tensor::full(s, 1.0, true); }

 private:
  std::mt19937_64 rng_;
};

void check_config(const ModelConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kConfigError, m); };
  if (c.patch <= 0 || c.image_height % c.patch != 0 || c.image_width % c.patch != 0)
    throw Error(ErrorCode::kBadPatchGrid, "image size must be a multiple of patch");
  if (c.dim <= 0 || c.heads <= 0 || c.dim % c.heads != 0) fail("dim must be divisible by heads");
  if (c.dim % 4 != 0) fail("dim must be a multiple of 4 for the 2-D position code");
  if (c.views < 1) fail("views must be >= 1");
  if (c.gaussians_per_view < 1) fail("gaussians_per_view must be >= 1");
  if (c.enc_depth < 0 || c.dec_depth < 0) fail("depth must be >= 0");
  if (!(c.focal_prior > 0)) fail("focal_prior must be positive");
}

// Bias row for an 11-wide geometric feature: unit rotation, log initial scale.
void write_feature_bias(std::span<Real> b, Real init_scale) {
  b[1] = 1.0;
  for (int k = 5; k < 8; ++k) b[static_cast<std::size_t>(k)] = std::log(init_scale);
}

Mlp make_mlp(Init& init, std::size_t in, std::size_t hidden, std::size_t out, Real out_std) {
  Mlp m;
  m.l1 = {init.normal({in, hidden}, 1.0 / std::sqrt(static_cast<Real>(in))), Init::zeros({1, hidden})};
  m.l2 = {out_std > 0 ? init.normal({hidden, out}, out_std / std::sqrt(static_cast<Real>(hidden)))
                      : Init::zeros({hidden, out}),
          Init::zeros({1, out})};
  return m;
}

// Redraws output columns [first, first + count) of every `stride`-wide record
// so that, at initialization, those raw outputs have roughly `out_std`
// spread (gelu hidden units have second moment ~0.425 for unit inputs).
void spread_columns(Init& init, Mlp& m, std::size_t first, std::size_t count, std::size_t stride,
                    Real out_std) {
  const std::size_t hidden = m.l2.w.rows(), out = m.l2.w.cols();
  const Real w_std = out_std / std::sqrt(0.425 * static_cast<Real>(hidden));
  const Tensor fresh = init.normal({hidden, out}, w_std);
  auto w = m.l2.w.mutable_values();
  for (std::size_t h = 0; h < hidden; ++h)
    for (std::size_t r = 0; r < out; r += stride)
      for (std::size_t k = first; k < first + count; ++k) w[h * out + r + k] = fresh.values()[h * out + r + k];
}

Block make_block(Init& init, std::size_t d, std::size_t f) {
  const Real s = 1.0 / std::sqrt(static_cast<Real>(d));
  Block b;
  b.norm1 = Init::ones({1, d});
  b.wq = init.normal({d, d}, s);
  b.wk = init.normal({d, d}, s);
  b.wv = init.normal({d, d}, s);
  b.wo = init.normal({d, d}, 0.5 * s);
  b.norm2 = Init::ones({1, d});
  b.ff1 = {init.normal({d, f}, s), Init::zeros({1, f})};
  b.ff2 = {init.normal({f, d}, 0.5 / std::sqrt(static_cast<Real>(f))), Init::zeros({1, d})};
  return b;
}

void add_named(ModelParams& p, const std::string& name, Tensor& t) {
  t.set_name(name);
  p.named.emplace_back(name, t);
}

void add_linear(ModelParams& p, const std::string& name, Linear& l) {
  add_named(p, name + ".w", l.w);
  add_named(p, name + ".b", l.b);
}

void add_mlp(ModelParams& p, const std::string& name, Mlp& m) {
  add_linear(p, name + ".l1", m.l1);
  add_linear(p, name + ".l2", m.l2);
}

void add_block(ModelParams& p, const std::string& name, Block& b) {
  add_named(p, name + ".norm1", b.norm1);
  add_named(p, name + ".wq", b.wq);
  add_named(p, name + ".wk", b.wk);
  add_named(p, name + ".wv", b.wv);
  add_named(p, name + ".wo", b.wo);
  add_named(p, name + ".norm2", b.norm2);
  add_linear(p, name + ".ff1", b.ff1);
  add_linear(p, name + ".ff2", b.ff2);
}

Tensor block_forward(const Block& b, const Tensor& x, int heads) {
  const Tensor h = rms_norm(x, b.norm1);
  const Tensor a = attention(matmul(h, b.wq), matmul(h, b.wk), matmul(h, b.wv),
                             static_cast<std::size_t>(heads));
  const Tensor x1 = add(x, matmul(a, b.wo));
  const Tensor h2 = rms_norm(x1, b.norm2);
  return add(x1, b.ff2(gelu(b.ff1(h2))));
}

Tensor cube_position(const ModelConfig& c, const Tensor& raw) {
  const Tensor center({1, 3}, {c.scene_center.x(), c.scene_center.y(), c.scene_center.z()});
  return add_row(scale(tanh(raw), c.scene_half_extent), center);
}

}  // namespace

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

ModelParams init_params(const ModelConfig& c) {
  check_config(c);
  Init init(c.seed);
  const auto d = static_cast<std::size_t>(c.dim);
  const auto v = static_cast<std::size_t>(c.views);
  const auto hh = static_cast<std::size_t>(c.head_hidden);
  const std::size_t patch_dim = 3 * static_cast<std::size_t>(c.patch) * c.patch;
  ModelParams p;
  p.embed = {init.normal({patch_dim, d}, 1.0 / std::sqrt(static_cast<Real>(patch_dim))),
             Init::zeros({1, d})};
  p.view_embed = init.normal({v, d}, 0.1);
  p.cam_tokens = init.normal({v, d}, 0.5);
  p.gauss_tokens = init.normal({static_cast<std::size_t>(c.gaussians_per_view), d}, 0.5);
  p.mask_token = init.normal({1, d}, 0.5);
  for (int i = 0; i < c.enc_depth; ++i)
    p.enc_blocks.push_back(make_block(init, d, static_cast<std::size_t>(c.ffn_hidden)));
  for (int i = 0; i < c.dec_depth; ++i)
    p.dec_blocks.push_back(make_block(init, d, static_cast<std::size_t>(c.ffn_hidden)));
  p.enc_norm = Init::ones({1, d});
  p.dec_norm = Init::ones({1, d});

  p.coarse_camera_head = make_mlp(init, d, hh, kCameraDims, 0.1);
  p.coarse_gauss_head = make_mlp(init, d + kCameraDims, hh, kCoarseGaussOut, 0.1);
  {
    auto b = p.coarse_gauss_head.l2.b.mutable_values();
    b[4] = 1.0;  // rotation w
    for (int k = 8; k < 11; ++k) b[static_cast<std::size_t>(k)] = std::log(c.geo_init_scale);
  }
  spread_columns(init, p.coarse_gauss_head, 0, 3, kCoarseGaussOut, kPositionInitSpread);
  p.anchor_head = make_mlp(init, d, hh, kAnchorOut, 0.1);
  spread_columns(init, p.anchor_head, 0, 3, kAnchorOut, kPositionInitSpread);
  write_feature_bias(p.anchor_head.l2.b.mutable_values().subspan(3, kGeometricFeatureDims),
                     c.semantic_init_scale);
  p.semantic_head =
      make_mlp(init, d + kGeometricFeatureDims + kSemanticDims, hh, kFanOut * kAnchorOut, 0.1);
  spread_columns(init, p.semantic_head, 0, 3, kAnchorOut, kOffsetInitSpread);
  for (std::size_t r = 0; r < kFanOut; ++r)
    write_feature_bias(
        p.semantic_head.l2.b.mutable_values().subspan(r * kAnchorOut + 3, kGeometricFeatureDims),
        c.semantic_init_scale);
  p.record_embed = init.normal({kFanOut, d}, 0.5);
  const std::size_t app_record =
      kRecordGeo + (c.fine_semantics == FineSemantics::kFresh ? kSemanticDims : 0);
  p.appearance_head = make_mlp(init, d, hh, kFanOut * app_record, 0.1);
  spread_columns(init, p.appearance_head, 0, 3, app_record, kOffsetInitSpread);
  for (std::size_t r = 0; r < kFanOut; ++r)
    write_feature_bias(
        p.appearance_head.l2.b.mutable_values().subspan(r * app_record + 3, kGeometricFeatureDims),
        c.appearance_init_scale);
  p.point_head = {init.normal({d, static_cast<std::size_t>(c.patch) * c.patch * 4},
                              0.1 / std::sqrt(static_cast<Real>(d))),
                  Init::zeros({1, static_cast<std::size_t>(c.patch) * c.patch * 4})};
  p.camera_head = make_mlp(init, d, hh, kCameraDims, 0.0);

  add_linear(p, "embed", p.embed);
  add_named(p, "view_embed", p.view_embed);
  add_named(p, "cam_tokens", p.cam_tokens);
  add_named(p, "gauss_tokens", p.gauss_tokens);
  add_named(p, "mask_token", p.mask_token);
  for (std::size_t i = 0; i < p.enc_blocks.size(); ++i)
    add_block(p, "enc." + std::to_string(i), p.enc_blocks[i]);
  for (std::size_t i = 0; i < p.dec_blocks.size(); ++i)
    add_block(p, "dec." + std::to_string(i), p.dec_blocks[i]);
  add_named(p, "enc_norm", p.enc_norm);
  add_named(p, "dec_norm", p.dec_norm);
  add_mlp(p, "head.coarse_camera", p.coarse_camera_head);
  add_mlp(p, "head.coarse_gauss", p.coarse_gauss_head);
  add_mlp(p, "head.anchor", p.anchor_head);
  add_mlp(p, "head.semantic", p.semantic_head);
  add_named(p, "head.record_embed", p.record_embed);
  add_mlp(p, "head.appearance", p.appearance_head);
  add_linear(p, "head.point", p.point_head);
  add_mlp(p, "head.camera", p.camera_head);
  return p;
}

Tensor position_code(const ModelConfig& c) {
  const int gh = c.image_height / c.patch, gw = c.image_width / c.patch;
  const auto d = static_cast<std::size_t>(c.dim);
  const std::size_t quarter = d / 4;
  std::vector<Real> v(static_cast<std::size_t>(gh) * gw * d);
  for (int y = 0; y < gh; ++y) {
    for (int x = 0; x < gw; ++x) {
      Real* row = &v[(static_cast<std::size_t>(y) * gw + x) * d];
      for (std::size_t k = 0; k < quarter; ++k) {
        const Real freq = std::pow(100.0, -static_cast<Real>(k) / static_cast<Real>(quarter));
        row[k] = std::sin(y * freq);
        row[quarter + k] = std::cos(y * freq);
        row[2 * quarter + k] = std::sin(x * freq);
        row[3 * quarter + k] = std::cos(x * freq);
      }
    }
  }
  return Tensor({static_cast<std::size_t>(gh) * gw, d}, v);
}

Tensor run_blocks(const std::vector<Block>& blocks, const Tensor& x, int heads) {
  Tensor h = x;
  for (const auto& b : blocks) h = block_forward(b, h, heads);
  return h;
}

EncodedState encode(const ModelParams& p, const ModelConfig& c, const TokenGrid& tokens,
                    const MaskSet& masks) {
  const auto v_count = static_cast<std::size_t>(c.views);
  if (tokens.views != c.views || tokens.patches() != c.patches() ||
      tokens.dim != p.embed.w.rows() || masks.visible.size() != v_count) {
    throw Error(ErrorCode::kShapeError, "encode: token grid does not match the model config");
  }
  const Tensor pos = position_code(c);
  std::vector<Tensor> seq;
  std::vector<std::size_t> counts;
  for (std::size_t v = 0; v < v_count; ++v) {
    const auto& vis = masks.visible[v];
    std::vector<Real> raw;
    raw.reserve(vis.size() * tokens.dim);
    for (std::size_t idx : vis) {
      const auto t = tokens.token(static_cast<int>(v), idx);
      raw.insert(raw.end(), t.begin(), t.end());
    }
    Tensor x = p.embed(Tensor({vis.size(), tokens.dim}, raw));
    x = add(x, gather_rows(pos, vis));
    x = add_row(x, slice_rows(p.view_embed, v, v + 1));
    seq.push_back(x);
    counts.push_back(vis.size());
  }
  seq.push_back(p.cam_tokens);
  for (std::size_t v = 0; v < v_count; ++v)
    seq.push_back(add_row(p.gauss_tokens, slice_rows(p.view_embed, v, v + 1)));
  const Tensor out = rms_norm(run_blocks(p.enc_blocks, concat_rows(seq), c.heads), p.enc_norm);

  EncodedState s;
  std::size_t row = 0;
  for (std::size_t v = 0; v < v_count; ++v) {
    s.y_vis.push_back(slice_rows(out, row, row + counts[v]));
    row += counts[v];
  }
  s.cam = slice_rows(out, row, row + v_count);
  row += v_count;
  s.gauss = slice_rows(out, row, out.rows());
  return s;
}

CoarseOutputs coarse_heads(const ModelParams& p, const ModelConfig& c, const Tensor& cam,
                           const Tensor& gauss) {
  CoarseOutputs out;
  out.cameras = camera_from_raw(p.coarse_camera_head(cam), c.focal_prior);
  const auto ng = static_cast<std::size_t>(c.gaussians_per_view);
  std::vector<std::size_t> view_of(gauss.rows());
  for (std::size_t i = 0; i < view_of.size(); ++i) view_of[i] = i / ng;
  const Tensor cond[] = {gauss, gather_rows(out.cameras, view_of)};
  const Tensor raw = p.coarse_gauss_head(concat_cols(cond));
  out.geo.centers = cube_position(c, slice_cols(raw, 0, 3));
  out.geo.opacity = sigmoid(slice_cols(raw, 3, 4));
  out.geo.rotation = normalize_rows(slice_cols(raw, 4, 8));
  out.geo.scales = clamp(exp(slice_cols(raw, 8, 11)), kMinScale, c.max_scale);
  out.geo.importance = softplus(slice_cols(raw, 11, 12));
  return out;
}

DecodedState decode(const ModelParams& p, const ModelConfig& c, const EncodedState& enc,
                    const MaskSet& masks) {
  const auto v_count = static_cast<std::size_t>(c.views);
  const std::size_t n_p = c.patches();
  if (enc.y_vis.size() != v_count || masks.dec.size() != v_count) {
    throw Error(ErrorCode::kShapeError, "decode: masks do not match views");
  }
  const Tensor pos = position_code(c);
  const Tensor fill_base = add_row(pos, p.mask_token);
  DecodedState out;
  std::vector<Tensor> seq;
  for (std::size_t v = 0; v < v_count; ++v) {
    const auto& vis = masks.visible[v];
    if (enc.y_vis[v].rows() != vis.size() || masks.dec[v].size() != vis.size()) {
      throw Error(ErrorCode::kShapeError, "decode: grid mismatch in view " + std::to_string(v));
    }
    const Tensor fill = add_row(fill_base, slice_rows(p.view_embed, v, v + 1));
    const Tensor table_parts[] = {enc.y_vis[v], fill};
    const Tensor table = concat_rows(table_parts);
    std::vector<std::size_t> index(n_p);
    for (std::size_t k = 0; k < n_p; ++k) index[k] = vis.size() + k;
    for (std::size_t i = 0; i < vis.size(); ++i)
      if (!masks.dec[v][i]) index[vis[i]] = i;
    for (std::size_t k = 0; k < n_p; ++k) out.mask_slots += index[k] >= vis.size();
    seq.push_back(gather_rows(table, index));
  }
  seq.push_back(enc.cam);
  seq.push_back(enc.gauss);
  const Tensor h = rms_norm(run_blocks(p.dec_blocks, concat_rows(seq), c.heads), p.dec_norm);
  const std::size_t grid_rows = v_count * n_p;
  out.grid = slice_rows(h, 0, grid_rows);
  out.cam = slice_rows(h, grid_rows, grid_rows + v_count);
  out.gauss = slice_rows(h, grid_rows + v_count, h.rows());
  return out;
}

FineOutputs fine_heads(const ModelParams& p, const ModelConfig& c, const Tensor& gauss) {
  FineOutputs out;
  const std::size_t na = gauss.rows();
  const Tensor a = p.anchor_head(gauss);
  out.anchor_centers = cube_position(c, slice_cols(a, 0, 3));
  out.anchor_features = slice_cols(a, 3, 3 + kGeometricFeatureDims);
  out.anchor_semantics = slice_cols(a, 3 + kGeometricFeatureDims, kAnchorOut);

  const Tensor sem_in[] = {gauss, out.anchor_features, out.anchor_semantics};
  const Tensor s = reshape(p.semantic_head(concat_cols(sem_in)), {na * kFanOut, kAnchorOut});
  out.semantic =
      expand_level(out.anchor_centers, scale(tanh(slice_cols(s, 0, 3)), c.semantic_offset_radius),
                   slice_cols(s, 3, kRecordGeo), slice_cols(s, kRecordGeo, kAnchorOut), c.max_scale);

  // Children of semantic Gaussian i (record k of anchor a) read the anchor's
  // token plus a learned record embedding.
  const std::size_t ns = na * kFanOut;
  std::vector<std::size_t> rec(ns);
  for (std::size_t i = 0; i < ns; ++i) rec[i] = i % kFanOut;
  const Tensor child_in = gelu(add(repeat_rows(gauss, kFanOut), gather_rows(p.record_embed, rec)));
  const bool fresh = c.fine_semantics == FineSemantics::kFresh;
  const std::size_t width = kRecordGeo + (fresh ? kSemanticDims : 0);
  const Tensor r = reshape(p.appearance_head(child_in), {ns * kFanOut, width});
  const Tensor gamma =
      fresh ? slice_cols(r, kRecordGeo, width) : repeat_rows(out.semantic.semantics, kFanOut);
  out.appearance = expand_level(out.semantic.centers,
                                scale(tanh(slice_cols(r, 0, 3)), c.appearance_offset_radius),
                                slice_cols(r, 3, kRecordGeo), gamma, c.max_scale);
  return out;
}

PointCameraOutputs point_and_camera_heads(const ModelParams& p, const ModelConfig& c,
                                          const Tensor& grid, const Tensor& cam,
                                          const Tensor& coarse_cameras) {
  const auto v_count = static_cast<std::size_t>(c.views);
  const std::size_t n_p = c.patches();
  const auto pp = static_cast<std::size_t>(c.patch);
  const auto gw = static_cast<std::size_t>(c.image_width / c.patch);
  const auto w = static_cast<std::size_t>(c.image_width);
  const std::size_t pixels = c.image_size().pixels();
  if (grid.rows() != v_count * n_p) throw Error(ErrorCode::kShapeError, "point head: grid rows");

  // Row (token t, sub-pixel s) -> pixel order.
  std::vector<std::size_t> order(pixels);
  for (std::size_t y = 0; y < static_cast<std::size_t>(c.image_height); ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t t = (y / pp) * gw + x / pp;
      const std::size_t s = (y % pp) * pp + x % pp;
      order[y * w + x] = t * pp * pp + s;
    }
  const Tensor center({1, 3}, {c.scene_center.x(), c.scene_center.y(), c.scene_center.z()});
  PointCameraOutputs out;
  for (std::size_t v = 0; v < v_count; ++v) {
    const Tensor raw = reshape(p.point_head(slice_rows(grid, v * n_p, (v + 1) * n_p)),
                               {n_p * pp * pp, 4});
    const Tensor px = gather_rows(raw, order);
    out.points.push_back(add_row(scale(slice_cols(px, 0, 3), c.scene_half_extent), center));
    out.confidence.push_back(add_scalar(softplus(slice_cols(px, 3, 4)), 1.0));
  }
  out.cameras = compose_camera_delta(coarse_cameras, p.camera_head(cam));
  return out;
}

ForwardOutputs forward(const ModelParams& p, const ModelConfig& c, std::span<const Image> images,
                       const ForwardOptions& o) {
  if (images.size() != static_cast<std::size_t>(c.views)) {
    throw Error(ErrorCode::kShapeError, "forward: expected " + std::to_string(c.views) + " views");
  }
  const TokenGrid tokens = patchify(images, c.patch);
  ForwardOutputs out;
  out.masks = make_encoder_masks(images.size(), tokens.patches(), o.rho_e, o.mask_seed);
  out.encoded = encode(p, c, tokens, out.masks);
  out.coarse = coarse_heads(p, c, out.encoded.cam, out.encoded.gauss);

  // Geometry-aware decoder mask from the coarse field's importance map.
  const auto cams = canonicalize_poses(cameras_from_tensor(out.coarse.cameras));
  RenderOptions ro;
  ro.workers = o.workers;
  out.importance =
      importance_for_masking(cams, c.image_size(), GaussianArrays::from(out.coarse.geo), ro);
  std::vector<std::vector<Real>> scores;
  for (const auto& j : out.importance) scores.push_back(pool_importance(j, c.patch));
  apply_geometry_masks(out.masks, scores, o.rho_d);

  out.decoded = decode(p, c, out.encoded, out.masks);
  out.fine = fine_heads(p, c, out.decoded.gauss);
  out.point_camera =
      point_and_camera_heads(p, c, out.decoded.grid, out.decoded.cam, out.coarse.cameras);
  return out;
}

// ---- checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'U', 'S', 'P', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) os.put(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::istream& is) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int ch = is.get();
    if (ch == std::char_traits<char>::eof()) throw Error(ErrorCode::kIoError, "checkpoint truncated");
    v |= static_cast<T>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return v;
}

}  // namespace

void save_checkpoint(std::ostream& os, const ModelParams& params, const std::string& config_text) {
  os.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.named.size()));
  for (const auto& [name, t] : params.named) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rows()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.cols()));
    for (Real x : t.values()) put_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  put_le<std::uint64_t>(os, config_text.size());
  os.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
  if (!os) throw Error(ErrorCode::kIoError, "checkpoint write failed");
}

std::string load_checkpoint(std::istream& is, ModelParams& params) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kIoError, "not a USPCKPT1 checkpoint");
  }
  const auto count = get_le<std::uint32_t>(is);
  if (count != params.named.size()) {
    throw Error(ErrorCode::kIoError, "checkpoint has " + std::to_string(count) +
                                         " parameters, model has " +
                                         std::to_string(params.named.size()));
  }
  for (auto& [name, t] : params.named) {
    const auto len = get_le<std::uint32_t>(is);
    std::string stored(len, '\0');
    is.read(stored.data(), len);
    const auto rows = get_le<std::uint32_t>(is);
    const auto cols = get_le<std::uint32_t>(is);
    if (stored != name || rows != t.rows() || cols != t.cols()) {
      throw Error(ErrorCode::kIoError, "checkpoint record " + stored + " does not match " + name);
    }
    auto values = t.mutable_values();
    for (auto& x : values) x = std::bit_cast<float>(get_le<std::uint32_t>(is));
  }
  const auto len = get_le<std::uint64_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw Error(ErrorCode::kIoError, "checkpoint config block truncated");
  return text;
}

std::string checkpoint_config(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kIoError, "not a USPCKPT1 checkpoint");
  }
  const auto count = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count && is; ++i) {
    const auto len = get_le<std::uint32_t>(is);
    is.ignore(len);
    const auto rows = get_le<std::uint32_t>(is);
    const auto cols = get_le<std::uint32_t>(is);
    is.ignore(static_cast<std::streamsize>(rows) * cols * 4);
  }
  const auto len = get_le<std::uint64_t>(is);
  std::string text(len, '\0');
  is.read(text.data(), static_cast<std::streamsize>(len));
  if (!is) throw Error(ErrorCode::kIoError, "checkpoint config block truncated");
  return text;
}

}  // namespace dualsplat
