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

// dualsplat command line: gen-scene, train, render, mask-vis, eval, gradcheck.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "dualsplat/config.hpp"
#include "dualsplat/error.hpp"
#include "dualsplat/gaussian_field.hpp"
#include "dualsplat/gradcheck_suite.hpp"
#include "dualsplat/io.hpp"
#include "dualsplat/train.hpp"

namespace fs = std::filesystem;
using namespace dualsplat;

namespace {

struct CommonOptions {
  std::string config = "desk-overfit";
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<int> views;
  std::optional<int> steps;
  std::string checkpoint;
};

void add_common(CLI::App* app, CommonOptions& o, bool with_checkpoint) {
  app->add_option("--config", o.config, "preset name or config file")->capture_default_str();
  app->add_option("--seed", o.seed, "scene and model seed");
  app->add_option("--out", o.out, "output directory")->capture_default_str();
  app->add_option("--views", o.views, "number of source views");
  app->add_option("--steps", o.steps, "training steps");
  if (with_checkpoint) app->add_option("--checkpoint", o.checkpoint, "USPCKPT1 checkpoint file");
}

RunConfig apply_overrides(RunConfig c, const CommonOptions& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.views) c.scene.views = *o.views;
  if (o.steps) c.train.steps = *o.steps;
  sync_model_to_scene(c);
  return c;
}

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig c = is_preset(o.config) ? preset(o.config) : parse_config(read_file(o.config));
  return apply_overrides(c, o);
}

// Parameters and run configuration: from --checkpoint when given (its embedded
// config wins over --config), otherwise freshly initialized.
struct LoadedModel {
  RunConfig config;
  ModelParams params;
};

LoadedModel load_model(const CommonOptions& o) {
  if (o.checkpoint.empty()) {
    RunConfig c = resolve_config(o);
    return {c, init_params(c.model)};
  }
  const std::string bytes = read_file(o.checkpoint);
  std::istringstream head(bytes);
  RunConfig c = parse_config(checkpoint_config(head));
  sync_model_to_scene(c);
  ModelParams params = init_params(c.model);
  std::istringstream ckpt(bytes);
  load_checkpoint(ckpt, params);
  return {c, params};
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_ppm_file(const fs::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  write_ppm(os, img);
}

void write_plane_file(const fs::path& path, const Image& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  write_plane(os, img);
}

std::string view_name(const char* prefix, std::size_t v, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%02zu.%s", prefix, v, ext);
  return buf;
}

int cmd_gen_scene(const CommonOptions& o) {
  const RunConfig c = resolve_config(o);
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  const fs::path out = prepare_out(o.out);
  std::ostringstream text;
  write_scene(text, scene);
  write_file((out / "scene.txt").string(), text.str());
  for (std::size_t v = 0; v < scene.images.size(); ++v) {
    write_ppm_file(out / view_name("view", v, "ppm"), scene.images[v]);
    write_plane_file(out / view_name("depth", v, "uspl"), scene.depth[v]);
    Image labels(scene.config.height, scene.config.width, 1);
    for (std::size_t i = 0; i < labels.data.size(); ++i) labels.data[i] = scene.labels[v][i];
    write_plane_file(out / view_name("labels", v, "uspl"), labels);
  }
  std::cout << "wrote " << scene.images.size() << " views to " << out.string() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& o) {
  const RunConfig c = resolve_config(o);
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  const fs::path out = prepare_out(o.out);
  const std::string config_text = to_text(c);
  write_file((out / "config.txt").string(), config_text);

  Trainer trainer(c, scene);
  std::ofstream log(out / "loss.jsonl", std::ios::binary);
  TrainHooks hooks;
  hooks.loss_log = &log;
  hooks.checkpoint = [&](std::int64_t step, const ModelParams& params) {
    std::ostringstream os;
    save_checkpoint(os, params, config_text);
    write_file((out / ("ckpt_" + std::to_string(step) + ".bin")).string(), os.str());
    write_file((out / "checkpoint.bin").string(), os.str());
  };
  hooks.progress = [&](std::int64_t step, const LossReport& r) {
    if (step % 100 == 0)
      std::fprintf(stderr, "step %lld total %.5f rgb %.4f sem %.4f pose %.5f point %.4f\n",
                   static_cast<long long>(step), r.total, r.rgb, r.sem, r.pose, r.point);
  };
  train(trainer, hooks);
  std::cout << "trained " << c.train.steps << " steps; outputs in " << out.string() << "\n";
  return 0;
}

int cmd_render(const CommonOptions& o) {
  const LoadedModel m = load_model(o);
  const SyntheticScene scene = gen_scene(m.config.scene, m.config.seed);
  const Prediction pred = predict(m.params, m.config, scene.pick(scene.images, scene.source));
  const auto codes = make_class_codes(scene.config.classes + 1, scene.seed);
  const auto gt = canonical_scene_cameras(scene);
  const fs::path out = prepare_out(o.out);

  auto emit = [&](const std::string& tag, std::size_t v, const CameraParams& cam) {
    const ViewRender r = render_prediction(pred, cam, scene.size(), m.config, codes.back());
    write_ppm_file(out / view_name((tag + "_rgb").c_str(), v, "ppm"), r.rgb);
    write_plane_file(out / view_name((tag + "_depth").c_str(), v, "uspl"), r.depth);
    write_plane_file(out / view_name((tag + "_sem").c_str(), v, "uspl"), r.semantics);
  };
  for (std::size_t i = 0; i < scene.source.size(); ++i) emit("source", scene.source[i], pred.cameras[i]);
  for (std::size_t v : scene.heldout) emit("heldout", v, gt[v]);

  std::ostringstream text;
  for (const auto& cam : pred.cameras) text << format_camera_line(cam) << "\n";
  const auto& fine = pred.outputs.fine;
  for (const auto& g : to_render_gaussians(fine.semantic, GaussianLevel::kSemantic))
    write_gaussian_line(text, g);
  for (const auto& g : to_render_gaussians(fine.appearance, GaussianLevel::kAppearance))
    write_gaussian_line(text, g);
  write_file((out / "gaussians.txt").string(), text.str());
  std::cout << "rendered " << scene.images.size() << " views to " << out.string() << "\n";
  return 0;
}

int cmd_mask_vis(const CommonOptions& o) {
  const LoadedModel m = load_model(o);
  const SyntheticScene scene = gen_scene(m.config.scene, m.config.seed);
  const auto inputs = scene.pick(scene.images, scene.source);
  ForwardOptions fo;
  fo.rho_e = m.config.train.rho_e;
  fo.rho_d = m.config.train.rho_d;
  fo.mask_seed = step_mask_seed(m.config.seed, 0);
  fo.workers = m.config.train.workers;
  const ForwardOutputs f = forward(m.params, m.config.model, inputs, fo);
  const fs::path out = prepare_out(o.out);
  const int p = m.config.model.patch;
  const int gw = scene.config.width / p;

  std::ostringstream lines;
  for (std::size_t v = 0; v < inputs.size(); ++v) {
    const std::size_t n_p = f.masks.enc[v].size();
    Mask hidden(n_p, 1);
    for (std::size_t k : f.masks.kept(v)) hidden[k] = 0;
    lines << mask_line(v, hidden) << "\n";
    // Encoder-hidden patches are dimmed to 20%, decoder-hidden ones to 50%.
    Image overlay = inputs[v];
    Mask enc_hidden = f.masks.enc[v];
    for (int y = 0; y < overlay.height; ++y)
      for (int x = 0; x < overlay.width; ++x) {
        const std::size_t k = static_cast<std::size_t>((y / p) * gw + x / p);
        const Real dim = enc_hidden[k] ? 0.2 : (hidden[k] ? 0.5 : 1.0);
        for (int ch = 0; ch < 3; ++ch) overlay.at(y, x, ch) *= dim;
      }
    write_ppm_file(out / view_name("mask", v, "ppm"), overlay);
  }
  write_file((out / "masks.txt").string(), lines.str());
  std::cout << "wrote masks for " << inputs.size() << " views to " << out.string() << "\n";
  return 0;
}

int cmd_eval(const CommonOptions& o) {
  const LoadedModel m = load_model(o);
  const SyntheticScene scene = gen_scene(m.config.scene, m.config.seed);
  const EvalReport r = evaluate(m.params, m.config, scene);
  const fs::path out = prepare_out(o.out);
  std::ostringstream os;
  write_metrics_jsonl(os, "source", r.source);
  if (!scene.heldout.empty()) write_metrics_jsonl(os, "heldout", r.heldout);
  write_file((out / "metrics.jsonl").string(), os.str());
  std::cout << os.str();
  return 0;
}

int cmd_gradcheck(const CommonOptions& o) {
  const std::uint64_t seed = o.seed.value_or(0);
  const fs::path out = prepare_out(o.out);
  std::ostringstream os;
  bool ok = true;
  for (const GradCheckCase& c : run_gradcheck_suite(seed)) {
    write_gradcheck_jsonl(os, c);
    ok = ok && c.passed();
  }
  write_file((out / "gradcheck.jsonl").string(), os.str());
  std::cout << os.str();
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualsplat: dual-masked feed-forward Gaussian splatting at desk scale"};
  app.require_subcommand(1);

  CommonOptions gen, trn, ren, vis, evl, grad;
  add_common(app.add_subcommand("gen-scene", "generate a synthetic scene"), gen, false);
  add_common(app.add_subcommand("train", "train on a synthetic scene"), trn, false);
  add_common(app.add_subcommand("render", "render source and held-out views"), ren, true);
  add_common(app.add_subcommand("mask-vis", "visualize the dual masks"), vis, true);
  add_common(app.add_subcommand("eval", "score a checkpoint"), evl, true);
  add_common(app.add_subcommand("gradcheck", "run the gradient check suite"), grad, false);

  CLI11_PARSE(app, argc, argv);
  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-scene") return cmd_gen_scene(gen);
    if (name == "train") return cmd_train(trn);
    if (name == "render") return cmd_render(ren);
    if (name == "mask-vis") return cmd_mask_vis(vis);
    if (name == "eval") return cmd_eval(evl);
    if (name == "gradcheck") return cmd_gradcheck(grad);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
