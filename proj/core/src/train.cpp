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


#include "dualsplat/train.hpp"

#include <cstdio>
#include <ostream>

#include "dualsplat/error.hpp"

namespace dualsplat {

namespace {

Tensor image_tensor(const Image& img) {
  return Tensor({img.pixels(), static_cast<std::size_t>(img.channels)}, img.data);
}

RenderOptions render_options(const RunConfig& config) {
  RenderOptions ro;
  ro.workers = config.train.workers;
  return ro;
}

}  // namespace

TrainingData make_training_data(const SyntheticScene& scene, const OracleTeachers& t) {
  TrainingData d;
  for (std::size_t i = 0; i < scene.source.size(); ++i) {
    const Image& img = scene.images[scene.source[i]];
    d.inputs.push_back(img);
    d.rgb_targets.push_back(image_tensor(img));
    d.sem_targets.push_back(image_tensor(t.features[i]));
    d.point_targets.push_back(image_tensor(t.points[i]));
    d.conf_targets.push_back(image_tensor(t.confidence[i]));
    d.valid.push_back(t.valid[i]);
  }
  d.camera_targets = cameras_to_tensor(t.cameras);
  d.background_code = t.class_codes.back();
  return d;
}

std::uint64_t step_mask_seed(std::uint64_t seed, std::int64_t step) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(step) + 1;
}

StepGraph build_step(const ModelParams& params, const RunConfig& config, const TrainingData& data,
                     std::uint64_t mask_seed) {
  const ModelConfig& mc = config.model;
  const ImageSize size = mc.image_size();
  ForwardOptions fo;
  fo.rho_e = config.train.rho_e;
  fo.rho_d = config.train.rho_d;
  fo.mask_seed = mask_seed;
  fo.workers = config.train.workers;

  StepGraph g;
  g.forward = forward(params, mc, data.inputs, fo);
  const auto& out = g.forward;
  g.cameras = canonicalize_cameras(out.point_camera.cameras);

  RenderOptions ro = render_options(config);
  RenderOptions ro_sem = ro;
  ro_sem.background_semantics = data.background_code;
  const std::size_t views = data.inputs.size();
  for (std::size_t v = 0; v < views; ++v) {
    const Tensor row = slice_rows(g.cameras, v, v + 1);
    g.rgb.push_back(
        render_tensors(row, out.fine.appearance, size, RenderChannels{true, false, false, false}, ro).rgb);
    g.semantics.push_back(render_tensors(row, out.fine.semantic, size,
                                         RenderChannels{false, true, false, false}, ro_sem)
                              .semantics);
  }

  // Per-pixel sums are scaled by 1 / (H W V) to keep step sizes comparable.
  const Real per_pixel = 1.0 / static_cast<Real>(size.pixels() * views);
  LossTerms terms;
  terms.rgb = loss_rgb(g.rgb, data.rgb_targets, size);
  terms.sem = scale(loss_sem(g.semantics, data.sem_targets), per_pixel);
  const GeoLoss geo = loss_geo(g.cameras, data.camera_targets, out.point_camera.points,
                               out.point_camera.confidence, data.point_targets, data.conf_targets,
                               data.valid);
  terms.pose = geo.pose;
  terms.point = scale(geo.point, per_pixel);
  const RecalibLoss rec = loss_recalib(g.rgb, g.semantics, out.point_camera.points, g.cameras, size);
  terms.recalib_geo = scale(rec.geo, per_pixel);
  terms.recalib_sem = scale(rec.sem, per_pixel);
  g.loss = total_loss(terms, config.train.weights);
  return g;
}

Trainer::Trainer(const RunConfig& config, const SyntheticScene& scene) : config_(config) {
  sync_model_to_scene(config_);
  data_ = make_training_data(scene, canonicalize(make_teachers(scene, config_.noise)));
  params_ = init_params(config_.model);
  optim_ = std::make_unique<AdamW>(params_.tensors(), config_.train.adamw);
}

LossReport Trainer::step() {
  try {
    const StepGraph g = build_step(params_, config_, data_, step_mask_seed(config_.seed, step_));
    optim_->zero_grad();
    backward(g.loss.total);
    optim_->step();
    ++step_;
    return g.loss.report;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNonFiniteLoss || e.code() == ErrorCode::kNonFiniteGrad) {
      throw Error(e.code(), "step " + std::to_string(step_) + ": " + e.what());
    }
    throw;
  }
}

std::vector<LossReport> train(Trainer& trainer, const TrainHooks& hooks) {
  std::vector<LossReport> history;
  const RunConfig& c = trainer.config();
  if (c.train.steps <= 0 && hooks.checkpoint) hooks.checkpoint(0, trainer.params());
  for (int i = 0; i < c.train.steps; ++i) {
    const std::int64_t step = trainer.steps_done();
    const LossReport r = trainer.step();
    history.push_back(r);
    if (hooks.loss_log && (c.train.log_every <= 1 || step % c.train.log_every == 0))
      write_loss_jsonl(*hooks.loss_log, step, r);
    if (hooks.progress) hooks.progress(step, r);
    const std::int64_t done = trainer.steps_done();
    const bool last = i + 1 == c.train.steps;
    if (hooks.checkpoint &&
        (last || (c.train.checkpoint_every > 0 && done % c.train.checkpoint_every == 0)))
      hooks.checkpoint(done, trainer.params());
  }
  return history;
}

std::uint64_t eval_mask_seed(std::uint64_t seed) { return step_mask_seed(seed, -1); }

Prediction predict(const ModelParams& params, const RunConfig& config,
                   std::span<const Image> inputs) {
  ForwardOptions fo;
  fo.rho_e = config.eval.rho_e;
  fo.rho_d = config.eval.rho_d;
  fo.mask_seed = eval_mask_seed(config.seed);
  fo.workers = config.train.workers;
  Prediction p;
  p.outputs = forward(params, config.model, inputs, fo);
  p.cameras = canonicalize_poses(cameras_from_tensor(p.outputs.point_camera.cameras));
  return p;
}

ViewRender render_prediction(const Prediction& prediction, const CameraParams& camera,
                             const ImageSize& size, const RunConfig& config,
                             std::span<const Real> background_code) {
  RenderOptions ro = render_options(config);
  const RenderedMaps app =
      render(camera, size, GaussianArrays::from(prediction.outputs.fine.appearance),
             RenderChannels{true, false, false, true}, ro);
  ro.background_semantics.assign(background_code.begin(), background_code.end());
  const RenderedMaps sem = render(camera, size, GaussianArrays::from(prediction.outputs.fine.semantic),
                                  RenderChannels{false, true, false, false}, ro);
  ViewRender out{app.rgb, sem.semantics, app.depth};
  for (std::size_t p = 0; p < out.depth.data.size(); ++p) {
    const Real a = app.alpha.data[p];
    out.depth.data[p] = a > 1e-6 ? out.depth.data[p] / a : 0.0;
  }
  return out;
}

std::vector<CameraParams> canonical_scene_cameras(const SyntheticScene& scene) {
  std::vector<CameraParams> ordered{scene.cameras[scene.source.front()]};
  ordered.insert(ordered.end(), scene.cameras.begin(), scene.cameras.end());
  auto canon = canonicalize_poses(ordered);
  canon.erase(canon.begin());
  return canon;
}

namespace {

MetricsReport score_views(const std::vector<ViewRender>& renders, const SyntheticScene& scene,
                          const std::vector<std::size_t>& views,
                          std::span<const std::vector<Real>> codes) {
  MetricsReport m;
  std::vector<std::vector<int>> pred, truth;
  std::vector<Image> depth_pred, depth_ref;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const std::size_t v = views[i];
    m.psnr += psnr(renders[i].rgb, scene.images[v]);
    m.ssim += ssim(renders[i].rgb, scene.images[v]);
    pred.push_back(decode_semantics(renders[i].semantics, codes));
    truth.push_back(scene.labels[v]);
    depth_pred.push_back(renders[i].depth);
    depth_ref.push_back(scene.depth[v]);
  }
  const auto n = static_cast<Real>(views.size());
  m.psnr /= n;
  m.ssim /= n;
  const auto seg = segmentation_scores(pred, truth, scene.config.classes + 1);
  m.miou = seg.miou;
  m.pix_acc = seg.pix_acc;
  if (const auto d = depth_scores(depth_pred, depth_ref)) {
    m.abs_rel = d->abs_rel;
    m.abs_rel_percent = 100.0 * d->abs_rel;
    m.tau = d->tau;
  }
  return m;
}

}  // namespace

EvalReport evaluate(const ModelParams& params, const RunConfig& config,
                    const SyntheticScene& scene) {
  const auto inputs = scene.pick(scene.images, scene.source);
  const Prediction pred = predict(params, config, inputs);
  const auto codes = make_class_codes(scene.config.classes + 1, scene.seed);
  const auto gt = canonical_scene_cameras(scene);
  const ImageSize size = scene.size();

  std::vector<ViewRender> src, held;
  for (std::size_t i = 0; i < scene.source.size(); ++i)
    src.push_back(render_prediction(pred, pred.cameras[i], size, config, codes.back()));
  for (std::size_t v : scene.heldout)
    held.push_back(render_prediction(pred, gt[v], size, config, codes.back()));

  EvalReport r;
  r.source = score_views(src, scene, scene.source, codes);
  if (!scene.heldout.empty()) r.heldout = score_views(held, scene, scene.heldout, codes);
  r.rotation_errors = pairwise_rotation_errors(pred.cameras, scene.pick(gt, scene.source));
  for (MetricsReport* m : {&r.source, &r.heldout}) {
    m->pose_auc5 = pose_auc(r.rotation_errors, 5.0);
    m->pose_auc10 = pose_auc(r.rotation_errors, 10.0);
    m->pose_auc20 = pose_auc(r.rotation_errors, 20.0);
    for (Real e : r.rotation_errors) m->max_rotation_error = std::max(m->max_rotation_error, e);
  }
  return r;
}

void write_metrics_jsonl(std::ostream& os, const std::string& split, const MetricsReport& m) {
  auto num = [](Real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<Real>& v) { return v ? num(*v) : std::string("null"); };
  os << "{\"split\":\"" << split << "\",\"psnr\":" << num(m.psnr) << ",\"ssim\":" << num(m.ssim)
     << ",\"miou\":" << num(m.miou) << ",\"pix_acc\":" << num(m.pix_acc)
     << ",\"abs_rel\":" << opt(m.abs_rel) << ",\"abs_rel_percent\":" << opt(m.abs_rel_percent)
     << ",\"tau\":" << opt(m.tau) << ",\"pose_auc5\":" << num(m.pose_auc5)
     << ",\"pose_auc10\":" << num(m.pose_auc10) << ",\"pose_auc20\":" << num(m.pose_auc20)
     << ",\"max_rotation_error_deg\":" << num(m.max_rotation_error) << "}\n";
}

}  // namespace dualsplat
