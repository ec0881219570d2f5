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

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance                       criteria 1-6, 8, 9; criterion 7 is skipped
//   acceptance --desk-overfit        also trains desk-overfit in process
//   acceptance --desk-overfit-checkpoint <file>
//                                    scores an existing desk-overfit checkpoint
//
// Exit status is nonzero when any evaluated criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dualsplat/config.hpp"
#include "dualsplat/gradcheck_suite.hpp"
#include "dualsplat/io.hpp"
#include "dualsplat/masking.hpp"
#include "dualsplat/network.hpp"
#include "dualsplat/objectives.hpp"
#include "dualsplat/rasterizer.hpp"
#include "dualsplat/train.hpp"
#include "support/oracle.hpp"

namespace dualsplat {
namespace {

// Pinned tolerances and thresholds.
constexpr Real kOracleTolerance = 1e-6;
constexpr double kOracleSeconds = 10.0;
constexpr double kGradcheckSeconds = 120.0;
constexpr std::size_t kConservationPixels = 1'000'000;
constexpr Real kRecalibTolerance = 1e-4;
constexpr Real kSourcePsnr = 28.0;
constexpr Real kSourceMiou = 0.90;
constexpr Real kHeldoutPsnr = 22.0;
constexpr Real kMaxRotationDegrees = 5.0;
constexpr double kDeskOverfitSeconds = 30.0 * 60.0;
constexpr int kDeterminismSteps = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Guards each criterion so one exception does not hide the rest.
void run(int id, const char* name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

Tensor image_tensor(const Image& img) {
  return Tensor({img.pixels(), static_cast<std::size_t>(img.channels)}, img.data);
}

CameraParams jittered_camera(std::mt19937_64& rng, Real focal) {
  return CameraParams(testing::random_unit_quaternion(rng) * 0.05 + Vec4(1, 0, 0, 0),
                      Vec3(0.05, -0.05, 0.1), focal, focal * 1.05);
}

void oracle_equivalence() {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> count(1, 50);
  std::uniform_real_distribution<double> b(0.0, 2.0);
  const ImageSize size{24, 20};
  const RenderChannels all{true, true, true, true};
  Real worst = 0.0;
  double production = 0.0;
  const auto t0 = Clock::now();
  for (int scene = 0; scene < 100; ++scene) {
    const auto field = testing::random_field(rng, static_cast<std::size_t>(count(rng)));
    std::vector<Real> beta(field.size());
    for (auto& x : beta) x = b(rng);
    const CameraParams cam = jittered_camera(rng, 30);
    GaussianTensors t = from_render_gaussians(field);
    t.importance = Tensor({field.size(), 1}, beta);
    const auto tp = Clock::now();
    const RenderedMaps m = render(cam, size, GaussianArrays::from(t), all);
    production += seconds_since(tp);
    const auto o = testing::oracle_render(cam, size, field, beta);
    for (const auto& [a, c] : {std::pair{&m.rgb, &o.rgb}, {&m.semantics, &o.semantics},
                               {&m.importance, &o.importance}, {&m.depth, &o.depth},
                               {&m.alpha, &o.alpha}})
      for (std::size_t i = 0; i < a->data.size(); ++i)
        worst = std::max(worst, std::abs(a->data[i] - c->data[i]));
  }
  const double total = seconds_since(t0);
  report(1, "rasterizer oracle equivalence", worst <= kOracleTolerance && total < kOracleSeconds,
         fmt("100 scenes, max |diff| %.3g (tol %.0e), %.2f s total (%.3f s production)", worst,
             kOracleTolerance, total, production));
}

void gradient_suite() {
  const auto t0 = Clock::now();
  const auto cases = run_gradcheck_suite(0);
  const double secs = seconds_since(t0);
  bool ok = secs < kGradcheckSeconds;
  std::string detail;
  for (const auto& c : cases) {
    ok = ok && c.passed();
    detail += fmt("%s %.2g/%.0e%s; ", c.name.c_str(), c.result.max_rel_error, c.tolerance,
                  c.passed() ? "" : " FAIL");
  }
  report(2, "gradient suite", ok, detail + fmt("%.1f s", secs));
}

void blending_conservation() {
  std::mt19937_64 rng(303);
  const ImageSize size{100, 100};
  std::size_t pixels = 0, violations = 0;
  Real lo = 1.0, hi = 0.0;
  while (pixels < kConservationPixels) {
    const auto field = testing::random_field(rng, 50, 0.999);
    const CameraParams cam = jittered_camera(rng, 60);
    const RenderedMaps m = render(cam, size, field, RenderChannels{});
    for (Real a : m.alpha.data) {
      if (!(a >= 0.0 && a <= 1.0)) ++violations;
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
    pixels += m.alpha.data.size();
  }
  report(3, "blending conservation", violations == 0,
         fmt("%zu pixels, %zu violations, sum w in [%.6f, %.6f]", pixels, violations, lo, hi));
}

void dual_mask_contract() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t bad_counts = 0, grids = 0;
  for (std::size_t n_p : {2u, 6u, 7u, 10u, 16u, 36u, 63u, 64u, 100u, 256u}) {
    MaskSet m = make_encoder_masks(4, n_p, 0.5, 17 + n_p);
    std::vector<std::vector<Real>> scores(4, std::vector<Real>(n_p));
    for (auto& s : scores)
      for (auto& x : s) x = u(rng);
    apply_geometry_masks(m, scores, 0.5);
    const auto expected =
        static_cast<std::size_t>(std::llround(0.5 * static_cast<Real>(std::llround(0.5 * n_p))));
    for (std::size_t v = 0; v < 4; ++v)
      if (m.kept(v).size() != expected) ++bad_counts;
    ++grids;
  }
  // Monotone invariance on a 64-patch grid.
  std::vector<Real> scores(64);
  for (auto& s : scores) s = u(rng);
  const auto vis = visible_indices(random_encoder_mask(64, 0.5, 9));
  const Mask ref = geometry_mask(scores, vis, 0.5);
  int changed = 0;
  for (int i = 0; i < 100; ++i) {
    const Real a = 0.1 + 3.0 * u(rng), b = u(rng) - 0.5, p = 0.25 + 3.0 * u(rng);
    const int family = i % 4;
    std::vector<Real> t(scores.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      const Real s = scores[k];
      switch (family) {
        case 0: t[k] = a * s + b; break;
        case 1: t[k] = a * std::pow(s, p) + b; break;
        case 2: t[k] = std::exp(a * s) - b; break;
        default: t[k] = std::log1p(a * s) + std::atan(p * s); break;
      }
    }
    if (geometry_mask(t, vis, 0.5) != ref) ++changed;
  }
  report(4, "dual-mask contract", bad_counts == 0 && changed == 0,
         fmt("%zu grid sizes x 4 views, %zu count mismatches; %d of 100 monotone maps changed "
             "the mask",
             grids, bad_counts, changed));
}

void hierarchy_cardinality() {
  RunConfig c = preset("desk-overfit");
  c.model.gaussians_per_view = 256;
  sync_model_to_scene(c);
  const SyntheticScene scene = gen_scene(c.scene, 5);
  const ModelParams params = init_params(c.model);
  const Prediction p = predict(params, c, scene.pick(scene.images, scene.source));
  const std::size_t v = static_cast<std::size_t>(c.model.views);
  const std::size_t anchors = p.outputs.fine.anchor_centers.rows() / v;
  const std::size_t sem = p.outputs.fine.semantic.count() / v;
  const std::size_t app = p.outputs.fine.appearance.count() / v;
  report(5, "hierarchy cardinality", anchors == 256 && sem == 2560 && app == 25600,
         fmt("per view: %zu anchors, %zu semantic, %zu appearance", anchors, sem, app));
}

void recalibration_fixed_point() {
  const ImageSize size{20, 16};
  const CameraParams cam(Vec4(0.98, 0.05, -0.1, 0.03), Vec3(0.1, -0.05, 0.2), 24, 26);
  std::mt19937_64 rng(606);
  auto field = testing::random_field(rng, 40, 0.9);
  for (auto& g : field) g.center = cam.rotation().transpose() * (g.center - cam.t());
  const RenderedMaps m = render(cam, size, field, {true, true, false, true});
  std::vector<Real> pts;
  for (int y = 0; y < size.height; ++y)
    for (int x = 0; x < size.width; ++x) {
      const Vec3 p = unproject(cam, size, x, y, m.depth.at(y, x));
      pts.insert(pts.end(), {p.x(), p.y(), p.z()});
    }
  const auto a = cam.to_array();
  const RecalibLoss l =
      loss_recalib(std::vector<Tensor>{image_tensor(m.rgb)},
                   std::vector<Tensor>{image_tensor(m.semantics)},
                   std::vector<Tensor>{Tensor({size.pixels(), 3}, pts)},
                   Tensor({1, 9}, std::vector<Real>(a.begin(), a.end())), size);
  const Real geo = l.geo.item(), sem = l.sem.item();
  report(6, "recalibration fixed point",
         geo <= kRecalibTolerance && sem <= kRecalibTolerance && l.valid_counts[0] > 0,
         fmt("L_geo %.3g, L_sem %.3g (tol %.0e), %zu valid pixels", geo, sem, kRecalibTolerance,
             l.valid_counts[0]));
}

void score_desk_overfit(const EvalReport& e, const std::string& timing, bool time_ok) {
  const Real max_rot =
      e.rotation_errors.empty() ? 0.0 : *std::max_element(e.rotation_errors.begin(),
                                                          e.rotation_errors.end());
  const bool pass = e.source.psnr >= kSourcePsnr && e.source.miou >= kSourceMiou &&
                    e.heldout.psnr >= kHeldoutPsnr && max_rot <= kMaxRotationDegrees && time_ok;
  report(7, "desk-overfit", pass,
         fmt("source PSNR %.2f dB (>= %.0f), source mIoU %.3f (>= %.2f), held-out PSNR %.2f dB "
             "(>= %.0f), max rotation error %.2f deg (<= %.0f), pose AUC@5 %.3f; %s",
             e.source.psnr, kSourcePsnr, e.source.miou, kSourceMiou, e.heldout.psnr,
             kHeldoutPsnr, max_rot, kMaxRotationDegrees, e.source.pose_auc5, timing.c_str()));
}

void desk_overfit_train() {
  RunConfig c = preset("desk-overfit");
  c.seed = 7;
  sync_model_to_scene(c);
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  Trainer trainer(c, scene);
  const auto t0 = Clock::now();
  train(trainer);
  const double secs = seconds_since(t0);
  score_desk_overfit(evaluate(trainer.params(), c, scene),
                     fmt("%d steps in %.1f min (<= %.0f)", c.train.steps, secs / 60.0,
                         kDeskOverfitSeconds / 60.0),
                     secs <= kDeskOverfitSeconds);
}

void desk_overfit_checkpoint(const std::string& path) {
  std::istringstream head(read_file(path));
  RunConfig c = parse_config(checkpoint_config(head));
  sync_model_to_scene(c);
  ModelParams params = init_params(c.model);
  std::istringstream body(read_file(path));
  load_checkpoint(body, params);
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  score_desk_overfit(evaluate(params, c, scene), "scored from " + path + " (training time not measured)",
                     true);
}

void loss_weight_wiring() {
  const LossWeights w = preset("desk-overfit").train.weights;
  const Real pose = total_loss(0, 0, 1, 0, 0, 0, w).total;
  const Real point = total_loss(0, 0, 0, 2, 0, 0, w).total;
  report(8, "loss-weight wiring", pose == 10.0 && point == 2.0,
         fmt("pose=1 -> %.17g, point=2 -> %.17g", pose, point));
}

struct RunBytes {
  std::string log, checkpoint;
};

RunBytes seeded_run() {
  RunConfig c = preset("desk-overfit");
  c.seed = 7;
  c.train.steps = kDeterminismSteps;
  sync_model_to_scene(c);
  const SyntheticScene scene = gen_scene(c.scene, c.seed);
  Trainer trainer(c, scene);
  std::ostringstream log, ckpt;
  TrainHooks hooks;
  hooks.loss_log = &log;
  hooks.checkpoint = [&](std::int64_t, const ModelParams& p) {
    ckpt.str("");
    save_checkpoint(ckpt, p, to_text(c));
  };
  train(trainer, hooks);
  return {log.str(), ckpt.str()};
}

void determinism() {
  const RunBytes a = seeded_run(), b = seeded_run();
  report(9, "determinism", a.log == b.log && a.checkpoint == b.checkpoint && !a.log.empty(),
         fmt("seed 7, %d steps: loss log %zu bytes %s, checkpoint %zu bytes %s", kDeterminismSteps,
             a.log.size(), a.log == b.log ? "identical" : "DIFFER", a.checkpoint.size(),
             a.checkpoint == b.checkpoint ? "identical" : "DIFFER"));
}

}  // namespace
}  // namespace dualsplat

int main(int argc, char** argv) {
  using namespace dualsplat;
  bool train_overfit = false;
  std::string overfit_checkpoint;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--desk-overfit") == 0) {
      train_overfit = true;
    } else if (std::strcmp(argv[i], "--desk-overfit-checkpoint") == 0 && i + 1 < argc) {
      overfit_checkpoint = argv[++i];
    } else {
      std::fprintf(stderr, "usage: %s [--desk-overfit | --desk-overfit-checkpoint <file>]\n",
                   argv[0]);
      return 2;
    }
  }

  run(1, "rasterizer oracle equivalence", oracle_equivalence);
  run(2, "gradient suite", gradient_suite);
  run(3, "blending conservation", blending_conservation);
  run(4, "dual-mask contract", dual_mask_contract);
  run(5, "hierarchy cardinality", hierarchy_cardinality);
  run(6, "recalibration fixed point", recalibration_fixed_point);
  if (train_overfit) {
    run(7, "desk-overfit", desk_overfit_train);
  } else if (!overfit_checkpoint.empty()) {
    run(7, "desk-overfit", [&] { desk_overfit_checkpoint(overfit_checkpoint); });
  } else {
    std::printf("SKIP [7] desk-overfit: pass --desk-overfit (about 40 min) or "
                "--desk-overfit-checkpoint <file>\n");
  }
  run(8, "loss-weight wiring", loss_weight_wiring);
  run(9, "determinism", determinism);
  std::printf("%d failure(s)\n", failures);
  return failures == 0 ? 0 : 1;
}
