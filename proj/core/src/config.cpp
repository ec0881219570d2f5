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


#include "dualsplat/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>
#include <vector>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Real parse_real(const std::string& s) {
  Real v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not a number");
  return v;
}

template <typename T>
T parse_integer(const std::string& s) {
  T v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw std::invalid_argument("not an integer");
  return v;
}

std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename M>
Field real_field(std::string key, M member) {
  return {std::move(key), [member](RunConfig& c, const std::string& s) { member(c) = parse_real(s); },
          [member](const RunConfig& c) { return format_real(member(c)); }};
}

template <typename T, typename M>
Field int_field(std::string key, M member) {
  return {std::move(key),
          [member](RunConfig& c, const std::string& s) { member(c) = parse_integer<T>(s); },
          [member](const RunConfig& c) { return std::to_string(member(c)); }};
}

// Accessors are generic so one lambda serves both the setter and the getter.
#define REAL(key, expr) real_field(key, [](auto& c) -> auto& { return expr; })
#define INT(key, expr) int_field<int>(key, [](auto& c) -> auto& { return expr; })
#define SIZE(key, expr) int_field<std::size_t>(key, [](auto& c) -> auto& { return expr; })
#define U64(key, expr) int_field<std::uint64_t>(key, [](auto& c) -> auto& { return expr; })

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      U64("seed", c.seed),
      INT("scene.views", c.scene.views),
      INT("scene.heldout", c.scene.heldout),
      INT("scene.height", c.scene.height),
      INT("scene.width", c.scene.width),
      INT("scene.classes", c.scene.classes),
      INT("scene.primitives", c.scene.primitives),
      REAL("scene.focal", c.scene.focal),
      REAL("scene.radius", c.scene.radius),
      REAL("scene.arc_degrees", c.scene.arc_degrees),
      REAL("scene.elevation_degrees", c.scene.elevation_degrees),
      REAL("scene.jitter_degrees", c.scene.jitter_degrees),
      REAL("scene.texture", c.scene.texture),
      INT("scene.supersample", c.scene.supersample),
      REAL("scene.background", c.scene.background),
      INT("model.patch", c.model.patch),
      INT("model.dim", c.model.dim),
      INT("model.heads", c.model.heads),
      INT("model.enc_depth", c.model.enc_depth),
      INT("model.dec_depth", c.model.dec_depth),
      INT("model.ffn_hidden", c.model.ffn_hidden),
      INT("model.head_hidden", c.model.head_hidden),
      INT("model.gaussians_per_view", c.model.gaussians_per_view),
      REAL("model.scene_half_extent", c.model.scene_half_extent),
      REAL("model.semantic_offset_radius", c.model.semantic_offset_radius),
      REAL("model.appearance_offset_radius", c.model.appearance_offset_radius),
      REAL("model.max_scale", c.model.max_scale),
      REAL("model.geo_init_scale", c.model.geo_init_scale),
      REAL("model.semantic_init_scale", c.model.semantic_init_scale),
      REAL("model.appearance_init_scale", c.model.appearance_init_scale),
      {"model.fine_semantics",
       [](RunConfig& c, const std::string& s) {
         if (s == "fresh") c.model.fine_semantics = FineSemantics::kFresh;
         else if (s == "copy") c.model.fine_semantics = FineSemantics::kCopyParent;
         else throw std::invalid_argument("expected fresh or copy");
       },
       [](const RunConfig& c) {
         return std::string(c.model.fine_semantics == FineSemantics::kFresh ? "fresh" : "copy");
       }},
      REAL("noise.rotation_degrees", c.noise.rotation_degrees),
      REAL("noise.translation", c.noise.translation),
      INT("train.steps", c.train.steps),
      REAL("train.lr", c.train.adamw.lr),
      REAL("train.beta1", c.train.adamw.beta1),
      REAL("train.beta2", c.train.adamw.beta2),
      REAL("train.eps", c.train.adamw.eps),
      REAL("train.weight_decay", c.train.adamw.weight_decay),
      REAL("train.rho_e", c.train.rho_e),
      REAL("train.rho_d", c.train.rho_d),
      REAL("train.lambda_pose", c.train.weights.pose),
      REAL("train.lambda_point", c.train.weights.point),
      INT("train.checkpoint_every", c.train.checkpoint_every),
      INT("train.log_every", c.train.log_every),
      SIZE("train.workers", c.train.workers),
      REAL("eval.rho_e", c.eval.rho_e),
      REAL("eval.rho_d", c.eval.rho_d),
  };
  return table;
}

#undef REAL
#undef INT
#undef SIZE
#undef U64

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw Error(ErrorCode::kConfigError, where + "expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (f.key == key) field = &f;
    if (!field) throw Error(ErrorCode::kConfigError, where + "unknown key '" + key + "'");
    try {
      field->set(base, value);
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorCode::kConfigError, where + key + ": " + e.what() + " ('" + value + "')");
    }
  }
  sync_model_to_scene(base);
  return base;
}

std::string to_text(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

void sync_model_to_scene(RunConfig& c) {
  c.model.views = c.scene.views;
  c.model.image_height = c.scene.height;
  c.model.image_width = c.scene.width;
  c.model.focal_prior = c.scene.focal;
  // Camera 0 looks at the cluster center from `radius` away, so in the
  // canonical frame the cluster sits on its optical axis.
  c.model.scene_center = Vec3(0.0, 0.0, c.scene.radius);
  c.model.seed = c.seed;
  c.noise.seed = c.seed + 1;
}

bool is_preset(const std::string& name) { return name == "desk-overfit" || name == "micro"; }

RunConfig preset(const std::string& name) {
  RunConfig c;
  if (name == "desk-overfit") {
    c.scene.views = 4;
    c.scene.heldout = 3;
    c.scene.height = 64;
    c.scene.width = 64;
    c.scene.classes = 4;
    c.model.gaussians_per_view = 16;
    c.train.steps = 5000;
    c.train.adamw.lr = 1e-4;
    c.train.weights = {10.0, 1.0};
  } else if (name == "micro") {
    c.scene.views = 2;
    c.scene.heldout = 1;
    c.scene.height = 16;
    c.scene.width = 16;
    c.scene.classes = 2;
    c.scene.primitives = 2;
    c.scene.focal = 16.0;
    c.model.dim = 16;
    c.model.heads = 2;
    c.model.enc_depth = 1;
    c.model.dec_depth = 1;
    c.model.ffn_hidden = 32;
    c.model.head_hidden = 16;
    c.model.gaussians_per_view = 2;
    c.train.steps = 20;
    c.train.adamw.lr = 1e-3;
  } else {
    throw Error(ErrorCode::kConfigError, "unknown preset '" + name + "'");
  }
  sync_model_to_scene(c);
  return c;
}

}  // namespace dualsplat
