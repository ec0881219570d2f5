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


#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "dualsplat/config.hpp"
#include "dualsplat/error.hpp"
#include "dualsplat/io.hpp"
#include "dualsplat/metrics.hpp"
#include "dualsplat/objectives.hpp"
#include "dualsplat/scene.hpp"
#include "dualsplat/teachers.hpp"
#include "dualsplat/train.hpp"

namespace dualsplat {
namespace {

SceneConfig small_scene() {
  SceneConfig c;
  c.views = 3;
  c.heldout = 2;
  c.height = 24;
  c.width = 32;
  c.classes = 3;
  c.primitives = 4;
  c.focal = 30.0;
  return c;
}

// ---- scene ---------------------------------------------------------------------

TEST(Scene, RegenerationIsBitIdentical) {
  const auto a = gen_scene(small_scene(), 5);
  const auto b = gen_scene(small_scene(), 5);
  std::ostringstream sa, sb;
  write_scene(sa, a);
  write_scene(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (std::size_t v = 0; v < a.images.size(); ++v) {
    EXPECT_EQ(a.images[v].data, b.images[v].data);
    EXPECT_EQ(a.depth[v].data, b.depth[v].data);
    EXPECT_EQ(a.labels[v], b.labels[v]);
  }
  const auto c = gen_scene(small_scene(), 6);
  EXPECT_NE(a.images[0].data, c.images[0].data);
}

TEST(Scene, ViewCountPrecondition) {
  SceneConfig c = small_scene();
  c.views = 2;
  EXPECT_NO_THROW(gen_scene(c, 1));
  c.views = 1;
  try {
    gen_scene(c, 1);
    FAIL() << "one view accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
    EXPECT_NE(std::string(e.what()).find("views"), std::string::npos);
  }
  c = small_scene();
  c.classes = 1;
  EXPECT_THROW(gen_scene(c, 1), Error);
}

TEST(Scene, LabelsStayInRange) {
  SceneConfig c = small_scene();
  c.classes = 3;
  c.primitives = 5;
  const auto s = gen_scene(c, 11);
  std::set<int> seen;
  for (const auto& l : s.labels) seen.insert(l.begin(), l.end());
  for (int id : seen) EXPECT_TRUE(id >= 0 && id <= 3) << id;
  EXPECT_TRUE(seen.count(3)) << "background id missing";
  EXPECT_GE(seen.size(), 2u);
}

TEST(Scene, HeldOutViewsInterleaveSources) {
  SceneConfig c = small_scene();
  c.views = 4;
  c.heldout = 3;
  const auto s = gen_scene(c, 2);
  EXPECT_EQ(s.source, (std::vector<std::size_t>{0, 2, 4, 6}));
  EXPECT_EQ(s.heldout, (std::vector<std::size_t>{1, 3, 5}));
}

TEST(Scene, CamerasFaceTheCluster) {
  const auto s = gen_scene(small_scene(), 3);
  for (const auto& cam : s.cameras) {
    const Vec3 o = cam.to_camera(Vec3::Zero());
    EXPECT_NEAR(o.x(), 0.0, 1e-12);
    EXPECT_NEAR(o.y(), 0.0, 1e-12);
    EXPECT_NEAR(o.z(), s.config.radius, 1e-12);
  }
}

TEST(Scene, PrimitivesFitTheUnitCube) {
  SceneConfig c = small_scene();
  c.primitives = 8;
  const auto s = gen_scene(c, 4);
  for (const auto& p : s.primitives) {
    const Real r = p.kind == PrimitiveKind::kSphere ? p.half_extent.x()
                                                    : std::hypot(p.half_extent.x(), p.half_extent.z());
    EXPECT_LE(std::abs(p.center.x()) + r, 1.0 + 1e-12);
    EXPECT_LE(std::abs(p.center.z()) + r, 1.0 + 1e-12);
    EXPECT_LE(std::abs(p.center.y()) + p.half_extent.y(), 1.0 + 1e-12);
  }
}

TEST(Scene, DepthMatchesAnalyticSphere) {
  Primitive p;
  p.kind = PrimitiveKind::kSphere;
  p.center = Vec3(0, 0, 0);
  p.half_extent = Vec3::Constant(0.5);
  const CameraParams cam = look_at(Vec3(0, 0, -3), Vec3::Zero(), 20.0);
  const ImageSize size{9, 9};
  const auto m = render_primitives(std::span(&p, 1), cam, size, 2, 0.0, 1);
  EXPECT_NEAR(m.depth.at(4, 4), 2.5, 1e-12);
  EXPECT_EQ(m.labels[0], 2);
  EXPECT_EQ(m.labels[4 * 9 + 4], 0);
  EXPECT_EQ(m.rgb.at(0, 0, 0), 0.0);
}

TEST(Scene, BoxHitFromEachAxis) {
  Primitive p;
  p.half_extent = Vec3(0.5, 0.25, 1.0);
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 o = Vec3::Zero(), d = Vec3::Zero();
    o[axis] = -5.0;
    d[axis] = 1.0;
    const auto h = intersect(p, o, d);
    ASSERT_TRUE(h.hit);
    EXPECT_NEAR(h.t, 5.0 - p.half_extent[axis], 1e-12);
    EXPECT_NEAR(h.normal[axis], -1.0, 1e-12);
  }
}

TEST(Scene, SceneFileLinesRoundTrip) {
  const auto s = gen_scene(small_scene(), 9);
  for (const auto& cam : s.cameras) {
    const auto back = parse_camera_line(format_camera_line(cam));
    EXPECT_EQ(back.to_array(), cam.to_array());
  }
  for (const auto& p : s.primitives) {
    EXPECT_EQ(format_primitive_line(parse_primitive_line(format_primitive_line(p))),
              format_primitive_line(p));
  }
  EXPECT_THROW(parse_primitive_line("prim cone 1 2 3"), Error);
  EXPECT_THROW(parse_camera_line("cam 1 0 0"), Error);
}

// ---- teachers --------------------------------------------------------------------

TEST(Teachers, ZeroNoiseUsesGroundTruthCameras) {
  const auto s = gen_scene(small_scene(), 1);
  const auto t = make_teachers(s);
  ASSERT_EQ(t.cameras.size(), s.source.size());
  for (std::size_t i = 0; i < s.source.size(); ++i)
    EXPECT_EQ(t.cameras[i].to_array(), s.cameras[s.source[i]].to_array());
}

TEST(Teachers, PointsReprojectOntoTheirPixel) {
  const auto s = gen_scene(small_scene(), 1);
  PoseNoise noise;
  noise.rotation_degrees = 3.0;
  noise.translation = 0.05;
  noise.seed = 4;
  for (const auto& t : {make_teachers(s), make_teachers(s, noise), canonicalize(make_teachers(s))}) {
    std::size_t checked = 0;
    for (std::size_t v = 0; v < t.cameras.size(); ++v) {
      for (int y = 0; y < s.config.height; ++y) {
        for (int x = 0; x < s.config.width; ++x) {
          if (!t.valid[v][static_cast<std::size_t>(y) * s.config.width + x]) continue;
          const Vec3 p(t.points[v].at(y, x, 0), t.points[v].at(y, x, 1), t.points[v].at(y, x, 2));
          const auto px = project_point(t.cameras[v], s.size(), p);
          ASSERT_TRUE(px.valid);
          EXPECT_NEAR(px.u, x, 1e-3);
          EXPECT_NEAR(px.v, y, 1e-3);
          EXPECT_NEAR(t.cameras[v].to_camera(p).z(), s.depth[s.source[v]].at(y, x), 1e-5);
          ++checked;
        }
      }
    }
    EXPECT_GT(checked, 100u);
  }
}

TEST(Teachers, NoisePerturbsByTheConfiguredAngle) {
  const auto s = gen_scene(small_scene(), 1);
  PoseNoise noise;
  noise.rotation_degrees = 4.0;
  const auto t = make_teachers(s, noise);
  for (std::size_t i = 0; i < t.cameras.size(); ++i)
    EXPECT_NEAR(relative_rotation_error(t.cameras[i], s.cameras[s.source[i]]), 4.0, 1e-9);
}

TEST(Teachers, ClassCodesAreOrthonormal) {
  const auto codes = make_class_codes(9, 3);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    for (std::size_t j = 0; j < codes.size(); ++j) {
      Real dot = 0;
      for (std::size_t k = 0; k < codes[i].size(); ++k) dot += codes[i][k] * codes[j][k];
      EXPECT_NEAR(dot, i == j ? 1.0 : 0.0, 1e-6);
    }
  }
  EXPECT_EQ(make_class_codes(9, 3), codes);
  EXPECT_THROW(make_class_codes(65, 0), Error);
}

TEST(Teachers, FeaturesCarryTheLabelCode) {
  const auto s = gen_scene(small_scene(), 8);
  const auto t = make_teachers(s);
  const auto decoded = decode_semantics(t.features[1], t.class_codes);
  EXPECT_EQ(decoded, s.labels[s.source[1]]);
}

// ---- metrics ---------------------------------------------------------------------

TEST(Metrics, PsnrOfKnownMse) {
  Image a(4, 4, 3, 0.5), b(4, 4, 3, 0.6);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_EQ(psnr(a, a), kPsnrCap);
}

TEST(Metrics, SelfEvaluationIsPerfect) {
  const auto s = gen_scene(small_scene(), 2);
  const auto& img = s.images[0];
  EXPECT_EQ(psnr(img, img), 99.0);
  EXPECT_NEAR(ssim(img, img), 1.0, 1e-12);
  const auto seg = segmentation_scores(std::span(s.labels), std::span(s.labels), 4);
  EXPECT_EQ(seg.miou, 1.0);
  EXPECT_EQ(seg.pix_acc, 1.0);
  const auto d = depth_scores(s.depth, s.depth);
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->abs_rel, 0.0);
  EXPECT_EQ(d->tau, 1.0);
}

TEST(Metrics, SegmentationByHand) {
  // truth 0 0 1 1, pred 0 1 1 1: IoU(0) = 1/2, IoU(1) = 2/3.
  const std::vector<std::vector<int>> truth{{0, 0, 1, 1}}, pred{{0, 1, 1, 1}};
  const auto s = segmentation_scores(pred, truth, 3);
  EXPECT_NEAR(s.miou, (0.5 + 2.0 / 3.0) / 2.0, 1e-12);
  EXPECT_NEAR(s.pix_acc, 0.75, 1e-12);
}

TEST(Metrics, DepthByHand) {
  Image pred(1, 3, 1), ref(1, 3, 1);
  pred.data = {1.1, 3.0, 5.0};
  ref.data = {1.0, 2.0, 0.0};
  const auto d = depth_scores(std::span(&pred, 1), std::span(&ref, 1));
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->count, 2u);
  EXPECT_NEAR(d->abs_rel, (0.1 + 0.5) / 2.0, 1e-12);
  EXPECT_NEAR(d->tau, 0.5, 1e-12);
  Image none(1, 3, 1);
  EXPECT_FALSE(depth_scores(std::span(&pred, 1), std::span(&none, 1)).has_value());
}

TEST(Metrics, PoseAucOfExactCamerasIsOne) {
  const auto s = gen_scene(small_scene(), 2);
  const auto errs = pairwise_rotation_errors(s.cameras, s.cameras);
  EXPECT_EQ(errs.size(), s.cameras.size() * (s.cameras.size() - 1) / 2);
  EXPECT_NEAR(pose_auc(errs, 5.0), 1.0, 1e-12);
  const std::vector<Real> e{2.5, 10.0};
  EXPECT_NEAR(pose_auc(e, 5.0), 0.25, 1e-12);
  EXPECT_NEAR(pose_auc(e, 20.0), (0.875 + 0.5) / 2.0, 1e-12);
}

// ---- config --------------------------------------------------------------------

TEST(Config, ParsesKeysCommentsAndBlankLines) {
  const RunConfig c = parse_config("# comment\n\nseed = 42\nscene.views = 3   # trailing\ntrain.lr=0.002\nmodel.fine_semantics = copy\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.scene.views, 3);
  EXPECT_EQ(c.model.views, 3);
  EXPECT_EQ(c.train.adamw.lr, 0.002);
  EXPECT_EQ(c.model.fine_semantics, FineSemantics::kCopyParent);
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  try {
    parse_config("seed = 1\nscene.colour = 3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("scene.colour"), std::string::npos);
  }
  EXPECT_THROW(parse_config("train.lr = fast\n"), Error);
  EXPECT_THROW(parse_config("scene.views = 2.5\n"), Error);
  EXPECT_THROW(parse_config("just words\n"), Error);
}

TEST(Config, TextRoundTrip) {
  RunConfig c = preset("desk-overfit");
  c.seed = 99;
  c.train.adamw.lr = 0.1 + 0.2;
  sync_model_to_scene(c);
  const RunConfig back = parse_config(to_text(c));
  EXPECT_EQ(to_text(back), to_text(c));
  EXPECT_EQ(back.train.adamw.lr, c.train.adamw.lr);
}

TEST(Config, DeskOverfitPreset) {
  const RunConfig c = preset("desk-overfit");
  EXPECT_EQ(c.scene.views, 4);
  EXPECT_EQ(c.scene.height, 64);
  EXPECT_EQ(c.scene.width, 64);
  EXPECT_EQ(c.scene.classes, 4);
  EXPECT_EQ(c.train.steps, 5000);
  EXPECT_EQ(c.train.adamw.lr, 1e-4);
  EXPECT_EQ(c.train.weights.pose, 10.0);
  EXPECT_EQ(c.train.weights.point, 1.0);
  EXPECT_THROW(preset("nope"), Error);
}

TEST(Config, ShippedDeskOverfitFileMatchesPreset) {
  RunConfig file = parse_config(read_file(DUALSPLAT_SOURCE_DIR "/configs/desk-overfit.cfg"));
  RunConfig built = preset("desk-overfit");
  built.seed = file.seed;
  sync_model_to_scene(file);
  sync_model_to_scene(built);
  EXPECT_EQ(to_text(file), to_text(built));
}

// ---- io ------------------------------------------------------------------------

TEST(Io, PpmRoundTripQuantizes) {
  Image img(3, 5, 3);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (auto& x : img.data) x = u(rng);
  std::stringstream ss;
  write_ppm(ss, img);
  EXPECT_EQ(ss.str().substr(0, 11), "P6\n5 3\n255\n");
  const Image back = read_ppm(ss);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    EXPECT_NEAR(back.data[i], std::clamp(img.data[i], 0.0, 1.0), 0.5 / 255.0 + 1e-12);
}

TEST(Io, PlaneHeaderAndRoundTrip) {
  Image img(2, 3, 4);
  for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = 0.25 * static_cast<Real>(i) - 1.0;
  std::stringstream ss;
  write_plane(ss, img);
  const std::string bytes = ss.str();
  ASSERT_EQ(bytes.size(), 16u + 4u * img.data.size());
  EXPECT_EQ(bytes.substr(0, 4), "USPL");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 4);
  const Image back = read_plane(ss);
  EXPECT_EQ(back.data, img.data);
  std::stringstream bad("XXXX");
  EXPECT_THROW(read_plane(bad), Error);
}

TEST(Io, MaskLine) {
  const std::vector<std::uint8_t> m{1, 0, 0, 1};
  EXPECT_EQ(mask_line(2, m), "v2: 1001");
}

// ---- training --------------------------------------------------------------------

RunConfig micro_run() {
  RunConfig c = preset("micro");
  c.seed = 3;
  c.train.steps = 3;
  sync_model_to_scene(c);
  return c;
}

TEST(Train, ZeroStepsCheckpointEqualsInitialization) {
  RunConfig c = micro_run();
  c.train.steps = 0;
  const auto scene = gen_scene(c.scene, c.seed);
  Trainer t(c, scene);
  std::string saved;
  TrainHooks hooks;
  hooks.checkpoint = [&](std::int64_t step, const ModelParams& p) {
    EXPECT_EQ(step, 0);
    std::ostringstream os;
    save_checkpoint(os, p, to_text(c));
    saved = os.str();
  };
  train(t, hooks);
  std::ostringstream fresh;
  save_checkpoint(fresh, init_params(c.model), to_text(c));
  EXPECT_EQ(saved, fresh.str());
}

TEST(Train, SeededRunsAreIdentical) {
  const RunConfig c = micro_run();
  const auto scene = gen_scene(c.scene, c.seed);
  auto run = [&] {
    Trainer t(c, scene);
    std::ostringstream log, ckpt;
    TrainHooks hooks;
    hooks.loss_log = &log;
    hooks.checkpoint = [&](std::int64_t, const ModelParams& p) { save_checkpoint(ckpt, p, ""); };
    train(t, hooks);
    return log.str() + ckpt.str();
  };
  const std::string a = run();
  EXPECT_EQ(a, run());
  EXPECT_NE(a.find("\"step\":2"), std::string::npos);
}

TEST(Train, LossTermsFiniteAndTotalMatchesWeights) {
  const RunConfig c = micro_run();
  const auto scene = gen_scene(c.scene, c.seed);
  Trainer t(c, scene);
  const LossReport r = t.step();
  for (Real x : {r.rgb, r.sem, r.pose, r.point, r.recalib_geo, r.recalib_sem}) {
    EXPECT_TRUE(std::isfinite(x));
    EXPECT_GE(x, 0.0);
  }
  EXPECT_NEAR(r.total, r.rgb + r.sem + 10.0 * r.pose + r.point + r.recalib_geo + r.recalib_sem,
              1e-9 * std::abs(r.total));
}

TEST(Train, EvaluationReportsEveryMetric) {
  const RunConfig c = micro_run();
  const auto scene = gen_scene(c.scene, c.seed);
  const EvalReport e = evaluate(init_params(c.model), c, scene);
  for (const MetricsReport* m : {&e.source, &e.heldout}) {
    EXPECT_GE(m->psnr, 0.0);
    EXPECT_LE(m->ssim, 1.0);
    EXPECT_GE(m->miou, 0.0);
    EXPECT_LE(m->miou, 1.0);
    EXPECT_GE(m->pose_auc5, 0.0);
    EXPECT_LE(m->pose_auc20, 1.0);
  }
  EXPECT_EQ(e.rotation_errors.size(), 1u);
  std::ostringstream os;
  write_metrics_jsonl(os, "source", e.source);
  EXPECT_EQ(os.str().rfind("{\"split\":\"source\",\"psnr\":", 0), 0u);
}

TEST(Train, CanonicalSceneCamerasStartAtIdentity) {
  const auto s = gen_scene(small_scene(), 3);
  const auto c = canonical_scene_cameras(s);
  const auto q = c[s.source.front()].q();
  EXPECT_NEAR(std::abs(q[0]), 1.0, 1e-12);
  EXPECT_NEAR(c[s.source.front()].t().norm(), 0.0, 1e-12);
  for (std::size_t i = 0; i < c.size(); ++i)
    EXPECT_NEAR(c[i].to_camera(Vec3(0, 0, s.config.radius)).head<2>().norm(), 0.0, 1e-9);
}

}  // namespace
}  // namespace dualsplat
