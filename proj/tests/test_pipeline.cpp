// Copyright 2026 The rvos Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "net_oracle.hpp"
#include "oracle.hpp"
#include "rvos/metrics.hpp"
#include "rvos/pipeline.hpp"
#include "rvos/synth.hpp"
#include "rvos/vision_ops.hpp"

using namespace rvos;
using ad::TensorRef;
using oracle::Vec;

namespace {

pipeline::PipelineConfig tiny_pipe(uint32_t seed) {
  pipeline::PipelineConfig cfg;
  cfg.seg.stages = {{1, 4}, {1, 6}};
  cfg.loc.roi_grid = 3;
  cfg.loc.fc_width = 16;
  cfg.loc.min_proposal_area = 4;
  cfg.train.epochs = 2;
  cfg.train.window = 3;
  cfg.train.base_lr = 1e-3f;
  cfg.train.online_lr = 3e-4f;
  cfg.train.online_iterations = 30;
  cfg.train.windows_per_video = 2;
  cfg.train.seed = seed;
  return cfg;
}

std::vector<data::VideoRecord> tiny_videos(uint32_t seed, int count = 2) {
  std::vector<data::VideoRecord> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    synth::SynthScene s;
    s.name = "tiny" + std::to_string(i);
    s.width = 32;
    s.height = 32;
    s.frames = 5;
    s.background_seed = rng.next_u32();
    synth::ObjectSpec o;
    o.kind = i % 2 ? synth::ShapeKind::Rect : synth::ShapeKind::Disk;
    o.radius = 6;
    o.half_w = 6;
    o.half_h = 5;
    o.cx0 = 12 + i * 2;
    o.cy0 = 14;
    o.vx = 1.2;
    o.vy = 0.5;
    o.texture_seed = rng.next_u32();
    s.objects = {o};
    if (i % 2) {
      synth::ObjectSpec b = o;
      b.kind = synth::ShapeKind::Disk;
      b.radius = 5;
      b.cx0 = 24;
      b.cy0 = 23;
      b.vx = -1.0;
      b.vy = 0.0;
      b.depth = 1;
      b.texture_seed = rng.next_u32();
      s.objects.push_back(b);
    }
    out.push_back(synth::generate(s, seed + static_cast<uint32_t>(i)));
  }
  return out;
}

std::vector<float> checkpoint_blob(const ad::ParamStore& ps) {
  std::vector<float> all;
  for (const auto& [name, t] : ps) all.insert(all.end(), t->data.begin(), t->data.end());
  return all;
}

}  // namespace

TEST_CASE("two-frame unrolled gradient reaches frame-1 parameters") {
  // separate parameter copies isolate the path through the first frame
  segnet::SegNetConfig cfg;
  cfg.stages = {{1, 3}, {1, 4}};
  ad::ParamStore ps;
  Rng rng(3);
  segnet::init_params(ps, cfg, "A/seg/", rng);
  segnet::init_params(ps, cfg, "B/seg/", rng);

  const int h = 16, w = 16;
  std::vector<float> f1(static_cast<size_t>(3) * h * w), f2(f1.size());
  for (auto& v : f1) v = rng.uniform();
  for (auto& v : f2) v = rng.uniform();
  std::vector<float> carry0(static_cast<size_t>(h) * w, 0.0f);
  for (int y = 5; y < 11; ++y)
    for (int x = 4; x < 10; ++x) carry0[static_cast<size_t>(y) * w + x] = 1.0f;
  std::vector<float> dx(static_cast<size_t>(h) * w), dy(dx.size());
  for (auto& v : dx) v = rng.uniform(-1.5f, 1.5f);
  for (auto& v : dy) v = rng.uniform(-1.5f, 1.5f);
  std::vector<uint8_t> gt2(static_cast<size_t>(h) * w, 0);
  for (int y = 6; y < 12; ++y)
    for (int x = 5; x < 11; ++x) gt2[static_cast<size_t>(y) * w + x] = 1;

  auto unrolled_loss = [&]() {
    std::vector<float> app1 = f1;
    app1.insert(app1.end(), carry0.begin(), carry0.end());
    auto prob1 =
        segnet::forward_seg(ad::make_tensor({4, h, w}, app1), nullptr, ps, "A/seg/", cfg).prob;
    auto warped = ad::warp_by_flow(prob1, dx, dy);
    auto app2 = ad::concat_channels(
        {ad::make_tensor({3, h, w}, f2), ad::reshape(warped, {1, h, w})});
    auto prob2 = segnet::forward_seg(app2, nullptr, ps, "B/seg/", cfg).prob;
    return ad::weighted_bce(prob2, gt2);
  };

  ps.zero_grads();
  auto loss = unrolled_loss();
  ad::backward(loss);

  // the recurrent path is alive: frame-1 parameters receive gradient
  double a_norm = 0;
  for (const auto& name : ps.names_under("A/"))
    for (float g : ps.get(name)->grad) a_norm += static_cast<double>(g) * g;
  CHECK(a_norm > 0.0);

  // f64 shadow of the whole unroll for finite differences
  auto shadow_loss = [&]() {
    Vec app1 = oracle::to_f64(f1);
    const Vec c0 = oracle::to_f64(carry0);
    app1.insert(app1.end(), c0.begin(), c0.end());
    const Vec prob1 = net_oracle::seg_ref(app1, nullptr, h, w, ps, "A/seg/", cfg);
    const Vec warped = oracle::warp_ref(prob1, h, w, oracle::to_f64(dx), oracle::to_f64(dy));
    Vec app2 = oracle::to_f64(f2);
    app2.insert(app2.end(), warped.begin(), warped.end());
    const Vec prob2 = net_oracle::seg_ref(app2, nullptr, h, w, ps, "B/seg/", cfg);
    return oracle::wbce_ref(prob2, gt2);
  };
  for (const std::string name : {"A/seg/app/s0c0/w", "A/seg/fuse/wa"}) {
    const Vec at = oracle::to_f64(ps.get(name)->data);
    const Vec fd = oracle::fd_gradient(
        [&](const Vec& v) {
          std::vector<float> saved = ps.get(name)->data;
          ps.get(name)->data = oracle::to_f32(v);
          const double l = shadow_loss();
          ps.get(name)->data = saved;
          return l;
        },
        at, 1e-4);
    CHECK_MESSAGE(oracle::max_rel_err(ps.get(name)->grad, fd) < 1e-2, name);
  }
}

TEST_CASE("static training: loss decreases, runs are bitwise reproducible") {
  const auto videos = tiny_videos(21);
  auto cfg = tiny_pipe(5);

  auto e1 = pipeline::Engine::create(cfg);
  const auto stats1 = e1.train_static(videos);
  REQUIRE(stats1.size() == 2);
  CHECK(stats1.back().mean_loss < stats1.front().mean_loss);

  auto e2 = pipeline::Engine::create(cfg);
  const auto stats2 = e2.train_static(videos);
  CHECK(stats1[0].mean_loss == stats2[0].mean_loss);
  CHECK(checkpoint_blob(e1.params()) == checkpoint_blob(e2.params()));

  auto cfg2 = cfg;
  cfg2.train.seed = 6;
  auto e3 = pipeline::Engine::create(cfg2);
  e3.train_static(videos);
  CHECK(checkpoint_blob(e1.params()) != checkpoint_blob(e3.params()));
}

TEST_CASE("disabling the box loss leaves localization parameters untouched") {
  const auto videos = tiny_videos(22);
  auto cfg = tiny_pipe(7);
  cfg.toggles.train_loc = false;
  cfg.train.epochs = 1;
  auto engine = pipeline::Engine::create(cfg);
  const auto before = [&] {
    std::vector<float> v;
    for (const auto& name : engine.params().names_under("base/loc/"))
      v.insert(v.end(), engine.params().get(name)->data.begin(),
               engine.params().get(name)->data.end());
    return v;
  };
  const auto loc_before = before();
  engine.train_static(videos);
  CHECK(before() == loc_before);

  // seg parameters did move
  bool seg_moved = false;
  auto fresh = pipeline::Engine::create(cfg);
  for (const auto& name : engine.params().names_under("base/seg/"))
    if (engine.params().get(name)->data != fresh.params().get(name)->data) seg_moved = true;
  CHECK(seg_moved);
}

TEST_CASE("recurrent training with window 1 equals the static stage") {
  const auto videos = tiny_videos(23);
  auto cfg = tiny_pipe(9);
  cfg.train.epochs = 1;
  cfg.train.window = 1;
  auto a = pipeline::Engine::create(cfg);
  a.train_recurrent(videos);
  auto cfg_b = cfg;
  auto b = pipeline::Engine::create(cfg_b);
  b.train_static(videos);
  CHECK(checkpoint_blob(a.params()) == checkpoint_blob(b.params()));
}

TEST_CASE("recurrent training runs and the loss trends down") {
  const auto videos = tiny_videos(24);
  auto cfg = tiny_pipe(11);
  cfg.train.epochs = 3;
  auto engine = pipeline::Engine::create(cfg);
  engine.train_static(videos);
  const auto stats = engine.train_recurrent(videos);
  REQUIRE(stats.size() == 3);
  CHECK(stats.back().mean_loss < stats.front().mean_loss * 1.5);  // no blow-up
  for (const auto& s : stats) CHECK(std::isfinite(s.mean_loss));
}

TEST_CASE("online finetuning: zero iterations copy, improvement, determinism") {
  const auto videos = tiny_videos(25);
  auto cfg = tiny_pipe(13);
  cfg.train.epochs = 2;
  auto engine = pipeline::Engine::create(cfg);
  engine.train_static(videos);
  const auto base_blob = checkpoint_blob(engine.params());

  const auto& video = videos[0];

  // zero iterations: per-object namespaces exist and equal the base values
  {
    auto cfg0 = cfg;
    cfg0.train.online_iterations = 0;
    auto e0 = pipeline::Engine::create(cfg0);
    e0.train_static(videos);
    e0.online_finetune(video);
    for (const auto& name : e0.params().names_under("obj1/"))
      CHECK(e0.params().get(name)->data ==
            e0.params().get("base/" + name.substr(5))->data);
  }

  // self-prediction on the first frame improves (or holds) after finetuning
  auto self_iou = [&](pipeline::Engine& e) {
    pipeline::FlowSource flows(video, e.config().flow_params, true);
    auto state = e.initial_state(video.masks[0], video.n_objects);
    const auto r = e.step_frame(state, flows, 1, video);
    return metrics::iou(img::mask_for_label(r.fused, 1), img::mask_for_label(video.masks[1], 1));
  };
  const double before = self_iou(engine);
  engine.online_finetune(video);
  const double after = self_iou(engine);
  CHECK(after >= before - 0.02);

  // determinism: same checkpoint + seed -> bitwise equal finetuned params
  {
    auto e1 = pipeline::Engine::create(cfg);
    e1.train_static(videos);
    e1.online_finetune(video);
    auto e2 = pipeline::Engine::create(cfg);
    e2.train_static(videos);
    e2.online_finetune(video);
    CHECK(checkpoint_blob(e1.params()) == checkpoint_blob(e2.params()));
  }
  (void)base_blob;
}

TEST_CASE("online finetuning rejects objects absent from the first frame") {
  const auto videos = tiny_videos(26);
  auto cfg = tiny_pipe(15);
  auto engine = pipeline::Engine::create(cfg);
  data::VideoRecord broken = videos[1];  // two objects
  REQUIRE(broken.n_objects == 2);
  for (auto& l : broken.masks[0].labels)
    if (l == 2) l = 0;  // erase object 2 from the first frame
  CHECK_THROWS_WITH_AS(engine.online_finetune(broken), doctest::Contains("object 2"),
                       std::runtime_error);
}

TEST_CASE("inference protocol: length, first frame, label range, purity") {
  const auto videos = tiny_videos(27);
  auto cfg = tiny_pipe(17);
  cfg.train.epochs = 1;
  auto engine = pipeline::Engine::create(cfg);
  engine.train_static(videos);
  const auto& video = videos[1];
  engine.online_finetune(video);
  const auto out = engine.infer(video);

  CHECK(out.masks.size() == static_cast<size_t>(video.frame_count()));
  CHECK(out.masks[0].labels == video.masks[0].labels);
  for (const auto& m : out.masks)
    for (uint8_t l : m.labels) CHECK(l <= video.n_objects);

  // recurrence purity: re-running from a saved state reproduces the suffix
  pipeline::FlowSource flows(video, cfg.flow_params, true);
  auto state = engine.initial_state(video.masks[0], video.n_objects);
  std::vector<img::LabelMask> once;
  pipeline::RecurrentState saved;
  for (int t = 1; t < video.frame_count(); ++t) {
    auto r = engine.step_frame(state, flows, t, video);
    once.push_back(r.fused);
    if (t == 2) saved = r.state;
    state = std::move(r.state);
  }
  pipeline::FlowSource flows2(video, cfg.flow_params, true);
  auto replay_state = saved;
  for (int t = 3; t < video.frame_count(); ++t) {
    auto r = engine.step_frame(replay_state, flows2, t, video);
    CHECK(r.fused.labels == once[static_cast<size_t>(t - 1)].labels);
    replay_state = std::move(r.state);
  }

  // infer matches the manual fold
  for (int t = 1; t < video.frame_count(); ++t)
    CHECK(out.masks[static_cast<size_t>(t)].labels == once[static_cast<size_t>(t - 1)].labels);
}

TEST_CASE("static scene with a perfect first mask propagates at high IoU") {
  synth::SynthScene scene;
  scene.name = "static";
  scene.width = 32;
  scene.height = 32;
  scene.frames = 4;
  scene.background_seed = 31;
  synth::ObjectSpec o;
  o.kind = synth::ShapeKind::Disk;
  o.radius = 7;
  o.cx0 = 15;
  o.cy0 = 17;  // no motion: the warp path is the identity
  o.texture_seed = 91;
  scene.objects = {o};
  const std::vector<data::VideoRecord> videos = {synth::generate(scene, 2)};

  auto cfg = tiny_pipe(33);
  cfg.seg.stages = {{2, 8}, {2, 16}};
  cfg.train.epochs = 6;
  cfg.train.online_iterations = 300;
  cfg.train.online_lr = 1e-3f;
  auto engine = pipeline::Engine::create(cfg);
  engine.train_static(videos);
  engine.online_finetune(videos[0]);

  pipeline::FlowSource flows(videos[0], cfg.flow_params, true);
  auto state = engine.initial_state(videos[0].masks[0], 1);
  const auto r = engine.step_frame(state, flows, 1, videos[0]);
  CHECK(metrics::iou(img::mask_for_label(r.fused, 1),
                     img::mask_for_label(videos[0].masks[0], 1)) >= 0.9);
}

TEST_CASE("missing flow with estimation disabled names the frame pair") {
  auto videos = tiny_videos(28, 1);
  auto& video = videos[0];
  video.flow_bwd.assign(video.flow_bwd.size(), std::nullopt);
  pipeline::FlowSource flows(video, flow::FlowParams{}, /*allow_estimation=*/false);
  CHECK_THROWS_WITH_AS(flows.backward(2), doctest::Contains("2->1"), std::runtime_error);
}

TEST_CASE("toggled-off warp path feeds the carried mask through unchanged") {
  auto videos = tiny_videos(29, 1);
  auto cfg = tiny_pipe(19);
  cfg.toggles.warp_mask = false;
  auto engine = pipeline::Engine::create(cfg);
  // with zero flow everywhere, warp on and off must agree bitwise
  auto& video = videos[0];
  for (auto& f : video.flow_bwd)
    if (f) {
      std::fill(f->dx.begin(), f->dx.end(), 0.0f);
      std::fill(f->dy.begin(), f->dy.end(), 0.0f);
    }
  pipeline::FlowSource flows(video, cfg.flow_params, true);
  auto state = engine.initial_state(video.masks[0], video.n_objects);
  const auto off = engine.step_frame(state, flows, 1, video);

  auto cfg_on = cfg;
  cfg_on.toggles.warp_mask = true;
  pipeline::Engine engine_on(cfg_on, ad::ParamStore{});
  // reuse the same parameters for a strict comparison
  pipeline::Engine engine_on2(cfg_on, [&] {
    ad::ParamStore copy;
    for (const auto& [name, t] : engine.params()) copy.add(name, ad::detach(t));
    return copy;
  }());
  pipeline::FlowSource flows2(video, cfg.flow_params, true);
  const auto on = engine_on2.step_frame(state, flows2, 1, video);
  for (size_t i = 0; i < off.probs.size(); ++i) CHECK(on.probs[i].v == off.probs[i].v);
}
