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

#include "rvos/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "rvos/vision_ops.hpp"

namespace rvos::pipeline {

using ad::TensorRef;
using img::BinMask;
using img::FlowField;
using img::Frame;
using img::GrayMap;

namespace {

uint32_t fnv1a(const std::string& s) {
  uint32_t h = 2166136261u;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

void copy_padded(const float* src, int w, int h, float* dst, int pw, int ph, float mul) {
  for (int y = 0; y < h; ++y) {
    float* row = dst + static_cast<int64_t>(y) * pw;
    const float* srow = src + static_cast<int64_t>(y) * w;
    for (int x = 0; x < w; ++x) row[x] = srow[x] * mul;
  }
  (void)ph;
}

GrayMap tensor_to_map(const TensorRef& t) {
  GrayMap out(t->dim(1), t->dim(0));
  out.v = t->data;
  return out;
}

img::BBox clamp_box(img::BBox b, int w, int h) {
  b.x_min = std::max(0.0f, b.x_min);
  b.y_min = std::max(0.0f, b.y_min);
  b.x_max = std::min(static_cast<float>(w), b.x_max);
  b.y_max = std::min(static_cast<float>(h), b.y_max);
  return b;
}

}  // namespace

// ---- FlowSource -----------------------------------------------------------

FlowSource::FlowSource(const data::VideoRecord& video, const flow::FlowParams& params,
                       bool allow_estimation)
    : video_(&video), params_(params), allow_estimation_(allow_estimation) {}

const FlowField& FlowSource::backward(int t) {
  if (t < 1 || t >= video_->frame_count())
    throw std::logic_error("FlowSource::backward: frame " + std::to_string(t) + " out of range");
  if (static_cast<size_t>(t) < video_->flow_bwd.size() &&
      video_->flow_bwd[static_cast<size_t>(t)])
    return *video_->flow_bwd[static_cast<size_t>(t)];
  auto it = bwd_cache_.find(t);
  if (it != bwd_cache_.end()) return it->second;
  if (!allow_estimation_)
    throw std::runtime_error("flow " + std::to_string(t) + "->" + std::to_string(t - 1) +
                             " missing for video " + video_->name + " and estimation disabled");
  return bwd_cache_
      .emplace(t, flow::estimate_flow(video_->frames[static_cast<size_t>(t)],
                                      video_->frames[static_cast<size_t>(t - 1)], params_))
      .first->second;
}

const FlowField& FlowSource::forward(int t) {
  if (t < 0 || t + 1 >= video_->frame_count())
    throw std::logic_error("FlowSource::forward: frame " + std::to_string(t) + " out of range");
  if (static_cast<size_t>(t) < video_->flow_fwd.size() &&
      video_->flow_fwd[static_cast<size_t>(t)])
    return *video_->flow_fwd[static_cast<size_t>(t)];
  auto it = fwd_cache_.find(t);
  if (it != fwd_cache_.end()) return it->second;
  if (!allow_estimation_)
    throw std::runtime_error("flow " + std::to_string(t) + "->" + std::to_string(t + 1) +
                             " missing for video " + video_->name + " and estimation disabled");
  return fwd_cache_
      .emplace(t, flow::estimate_flow(video_->frames[static_cast<size_t>(t)],
                                      video_->frames[static_cast<size_t>(t + 1)], params_))
      .first->second;
}

GrayMap FlowSource::forward_magnitude(int t) {
  return vision::flow_magnitude(t + 1 >= video_->frame_count() ? backward(t) : forward(t));
}

// ---- Engine ---------------------------------------------------------------

Engine::Engine(PipelineConfig cfg, ad::ParamStore params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.seg.validate();
  cfg_.loc.validate();
  cfg_.fuse.validate();
}

Engine Engine::create(const PipelineConfig& cfg) {
  Rng rng(cfg.train.seed);
  ad::ParamStore store;
  segnet::init_params(store, cfg.seg, "base/seg/", rng);
  locnet::init_params(store, cfg.loc, cfg.seg.stages.back().width, "base/loc/", rng);
  return Engine(cfg, std::move(store));
}

std::string Engine::object_prefix(int object_id) const {
  const std::string obj = "obj" + std::to_string(object_id) + "/";
  return params_.has_namespace(obj) ? obj : std::string("base/");
}

Engine::ForwardOut Engine::forward_object(const Frame& frame, const TensorRef& carried_mask,
                                          const GrayMap& mag_bwd, const GrayMap& mag_fwd,
                                          const std::string& prefix) {
  const int w = frame.width, h = frame.height;
  const int factor = cfg_.seg.pool_factor();
  const int pw = round_up(w, factor), ph = round_up(h, factor);
  const int64_t pplane = static_cast<int64_t>(pw) * ph;
  const int64_t plane = static_cast<int64_t>(w) * h;

  std::vector<float> frame_data(static_cast<size_t>(pplane) * 3, 0.0f);
  for (int c = 0; c < 3; ++c)
    copy_padded(frame.rgb.data() + c * plane, w, h, frame_data.data() + c * pplane, pw, ph, 1.0f);
  TensorRef frame_t = ad::make_tensor({3, ph, pw}, std::move(frame_data));

  TensorRef mask_t = carried_mask;
  if (pw != w || ph != h) mask_t = ad::pad2d(mask_t, ph, pw);
  mask_t = ad::reshape(mask_t, {1, ph, pw});

  TensorRef app = ad::concat_channels({frame_t, mask_t});

  TensorRef flo;
  if (cfg_.toggles.flow_stream) {
    const float s = cfg_.seg.flow_magnitude_scale;
    std::vector<float> mags(static_cast<size_t>(pplane) * 2, 0.0f);
    copy_padded(mag_bwd.v.data(), w, h, mags.data(), pw, ph, s);
    copy_padded(mag_fwd.v.data(), w, h, mags.data() + pplane, pw, ph, s);
    flo = ad::concat_channels({ad::make_tensor({2, ph, pw}, std::move(mags)), mask_t});
  }

  segnet::SegForward seg = segnet::forward_seg(app, flo, params_, prefix + "seg/", cfg_.seg);
  TensorRef prob = seg.prob;
  if (pw != w || ph != h) prob = ad::crop2d(prob, h, w);
  return {prob, seg.deepest_app};
}

RecurrentState Engine::initial_state(const img::LabelMask& first_gt, int n_objects) const {
  RecurrentState st;
  for (int i = 1; i <= n_objects; ++i) {
    const BinMask m = img::mask_for_label(first_gt, i);
    st.prev_maps.push_back(img::to_gray(m));
    st.last_box.push_back(vision::tight_bbox(m, 1));
  }
  return st;
}

StepResult Engine::step_frame(const RecurrentState& state, FlowSource& flows, int t,
                              const data::VideoRecord& video) {
  const Frame& frame = video.frames[static_cast<size_t>(t)];
  const int w = frame.width, h = frame.height;
  const int n = static_cast<int>(state.prev_maps.size());

  const FlowField& bwd = flows.backward(t);
  const GrayMap mag_b = vision::flow_magnitude(bwd);
  const GrayMap mag_f = flows.forward_magnitude(t);

  StepResult out;
  out.state.prev_maps.resize(static_cast<size_t>(n));
  out.state.last_box = state.last_box;
  for (int i = 0; i < n; ++i) {
    const std::string prefix = object_prefix(i + 1);
    const GrayMap warped =
        cfg_.toggles.warp_mask
            ? vision::warp_backward(state.prev_maps[static_cast<size_t>(i)], bwd)
            : state.prev_maps[static_cast<size_t>(i)];
    TensorRef carried = ad::make_tensor({h, w}, warped.v);
    ForwardOut fo = forward_object(frame, carried, mag_b, mag_f, prefix);
    GrayMap prob = tensor_to_map(fo.prob);

    std::optional<img::BBox> applied;
    if (cfg_.toggles.apply_loc) {
      std::optional<img::BBox> prop = locnet::propose(warped, cfg_.loc);
      if (!prop && state.last_box[static_cast<size_t>(i)]) {
        // object lost: retry from the last valid box, grown to compensate
        img::BBox grown = locnet::enlarge(*state.last_box[static_cast<size_t>(i)],
                                          cfg_.loc.lost_enlarge_factor, w, h);
        if (grown.valid()) prop = grown;
      }
      if (prop) {
        TensorRef delta_t = locnet::forward_delta(fo.deepest_app, *prop, params_,
                                                  prefix + "loc/", cfg_.loc,
                                                  cfg_.seg.pool_factor());
        const locnet::BBoxDelta d{delta_t->data[0], delta_t->data[1], delta_t->data[2],
                                  delta_t->data[3]};
        img::BBox regressed = clamp_box(locnet::apply_delta(*prop, d), w, h);
        if (!regressed.valid()) regressed = *prop;
        applied = locnet::enlarge(regressed, cfg_.loc.enlarge_factor, w, h);
        prob = locnet::restrict_map(prob, *applied);
        out.state.last_box[static_cast<size_t>(i)] = regressed;
      }
    }
    out.boxes.push_back(applied);
    out.probs.push_back(prob);
    out.state.prev_maps[static_cast<size_t>(i)] = prob;
  }
  out.fused = fusion::fuse(out.probs, cfg_.fuse);
  return out;
}

namespace {
struct SampleKey {
  int video, t, obj;
};
}  // namespace

std::vector<EpochStats> Engine::train_static(const std::vector<data::VideoRecord>& videos) {
  if (videos.empty()) throw std::invalid_argument("train_static: empty dataset");
  std::vector<FlowSource> flows;
  flows.reserve(videos.size());
  for (const auto& v : videos)
    flows.emplace_back(v, cfg_.flow_params, cfg_.allow_flow_estimation);

  std::vector<SampleKey> samples;
  for (size_t vi = 0; vi < videos.size(); ++vi) {
    const auto& v = videos[vi];
    for (int t = 1; t < v.frame_count(); ++t) {
      if (!v.has_mask(t) || !v.has_mask(t - 1)) continue;
      for (int obj = 1; obj <= v.n_objects; ++obj)
        samples.push_back({static_cast<int>(vi), t, obj});
    }
  }
  if (samples.empty()) throw std::invalid_argument("train_static: no trainable samples");

  Rng rng(cfg_.train.seed ^ 0xA5A50001u);
  ad::AdamState adam;
  std::vector<EpochStats> stats;
  for (int epoch = 0; epoch < cfg_.train.epochs; ++epoch) {
    adam.learning_rate =
        cfg_.train.base_lr * std::pow(cfg_.train.epoch_decay, static_cast<float>(epoch));
    std::vector<SampleKey> order = samples;
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (const SampleKey& k : order) {
      params_.zero_grads();
      TensorRef loss = static_sample_loss(videos[static_cast<size_t>(k.video)],
                                          flows[static_cast<size_t>(k.video)], k.t, k.obj, rng);
      const double lv = loss->value();
      if (!std::isfinite(lv))
        throw NumericError("static stage: non-finite loss at video " +
                           videos[static_cast<size_t>(k.video)].name + " frame " +
                           std::to_string(k.t));
      ad::backward(loss);
      ad::adam_step(params_, adam);
      loss_sum += lv;
    }
    stats.push_back(
        {loss_sum / static_cast<double>(order.size()), static_cast<int>(order.size())});
  }
  return stats;
}

TensorRef Engine::static_sample_loss(const data::VideoRecord& video, FlowSource& flows, int t,
                                     int obj, Rng& rng) {
  const Frame& frame = video.frames[static_cast<size_t>(t)];
  const int w = frame.width, h = frame.height;
  BinMask gt_t = img::mask_for_label(video.masks[static_cast<size_t>(t)], obj);
  BinMask gt_prev = img::mask_for_label(video.masks[static_cast<size_t>(t - 1)], obj);
  FlowField bwd = flows.backward(t);
  FlowField fwd = t + 1 < video.frame_count() ? flows.forward(t) : bwd;

  Frame f2 = frame;
  if (cfg_.train.augment) {
    const auto draw = vision::draw_augment(w, h, vision::AugmentParams{}, rng);
    auto trip = vision::apply_augment(frame, gt_t, bwd, draw);
    f2 = std::move(trip.frame);
    gt_t = std::move(trip.mask);
    bwd = std::move(trip.flow);
    auto trip2 = vision::apply_augment(frame, gt_prev, fwd, draw);
    gt_prev = std::move(trip2.mask);
    fwd = std::move(trip2.flow);
  }

  // imperfect previous prediction: perturb the previous gt, then warp it
  const BinMask perturbed = vision::perturb_mask(gt_prev, rng);
  GrayMap carried = img::to_gray(perturbed);
  if (cfg_.toggles.warp_mask) carried = vision::warp_backward(carried, bwd);

  TensorRef carried_t = ad::make_tensor({h, w}, carried.v);
  ForwardOut fo = forward_object(f2, carried_t, vision::flow_magnitude(bwd),
                                 vision::flow_magnitude(fwd), "base/");
  TensorRef loss = ad::weighted_bce(fo.prob, gt_t.fg);

  if (cfg_.toggles.train_loc) {
    const auto prop = locnet::propose(carried, cfg_.loc);
    const auto gt_box = vision::tight_bbox(gt_t, 1);
    if (prop && gt_box) {
      TensorRef delta = locnet::forward_delta(fo.deepest_app, *prop, params_, "base/loc/",
                                              cfg_.loc, cfg_.seg.pool_factor());
      const locnet::BBoxDelta target = locnet::encode_delta(*prop, *gt_box);
      TensorRef box_loss = ad::smooth_l1(delta, {target.tx, target.ty, target.tw, target.th});
      loss = ad::add(loss, ad::scale(box_loss, cfg_.train.lambda_bbox));
    }
  }
  return loss;
}

std::vector<EpochStats> Engine::train_recurrent(const std::vector<data::VideoRecord>& videos) {
  if (cfg_.train.window == 1) return train_static(videos);  // degenerate window
  if (cfg_.train.window < 1) throw std::invalid_argument("train_recurrent: window must be >= 1");
  if (videos.empty()) throw std::invalid_argument("train_recurrent: empty dataset");

  std::vector<FlowSource> flows;
  flows.reserve(videos.size());
  for (const auto& v : videos)
    flows.emplace_back(v, cfg_.flow_params, cfg_.allow_flow_estimation);

  Rng rng(cfg_.train.seed ^ 0xB7B70002u);
  ad::AdamState adam;
  std::vector<EpochStats> stats;
  for (int epoch = 0; epoch < cfg_.train.epochs; ++epoch) {
    adam.learning_rate =
        cfg_.train.base_lr * std::pow(cfg_.train.epoch_decay, static_cast<float>(epoch));
    double loss_sum = 0.0;
    int windows = 0;
    for (size_t vi = 0; vi < videos.size(); ++vi) {
      const auto& video = videos[vi];
      const int t_count = video.frame_count();
      const int w_eff = std::min(cfg_.train.window, t_count);
      if (w_eff < 2) continue;
      for (int k = 0; k < cfg_.train.windows_per_video; ++k) {
        const int t0 = t_count == w_eff ? 0 : rng.uniform_int(t_count - w_eff + 1);
        loss_sum += window_step(video, flows[vi], t0, w_eff, rng, adam);
        ++windows;
      }
    }
    if (windows == 0) throw std::invalid_argument("train_recurrent: no usable windows");
    stats.push_back({loss_sum / windows, windows});
  }
  return stats;
}

double Engine::window_step(const data::VideoRecord& video, FlowSource& flows, int t0, int w_eff,
                           Rng& rng, ad::AdamState& adam) {
  const int n = video.n_objects;
  const int w = video.frames[0].width, h = video.frames[0].height;
  for (int t = t0; t < t0 + w_eff; ++t)
    if (!video.has_mask(t))
      throw std::invalid_argument("train_recurrent: video " + video.name +
                                  " lacks a mask at frame " + std::to_string(t));

  std::optional<vision::AugmentDraw> draw;
  if (cfg_.train.augment) draw = vision::draw_augment(w, h, vision::AugmentParams{}, rng);

  params_.zero_grads();
  std::vector<TensorRef> carry(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    BinMask m = img::mask_for_label(video.masks[static_cast<size_t>(t0)], i + 1);
    if (draw) m = vision::apply_augment_mask(m, *draw);
    carry[static_cast<size_t>(i)] = ad::make_tensor({h, w}, img::to_gray(m).v);
  }

  TensorRef total;
  for (int t = t0 + 1; t < t0 + w_eff; ++t) {
    const Frame& frame = video.frames[static_cast<size_t>(t)];
    FlowField bwd = flows.backward(t);
    FlowField fwd = t + 1 < video.frame_count() ? flows.forward(t) : bwd;

    Frame f2 = frame;
    std::vector<BinMask> gt(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      gt[static_cast<size_t>(i)] =
          img::mask_for_label(video.masks[static_cast<size_t>(t)], i + 1);
    if (draw) {
      auto trip = vision::apply_augment(frame, gt[0], bwd, *draw);
      f2 = std::move(trip.frame);
      gt[0] = std::move(trip.mask);
      bwd = std::move(trip.flow);
      for (int i = 1; i < n; ++i)
        gt[static_cast<size_t>(i)] =
            vision::apply_augment_mask(gt[static_cast<size_t>(i)], *draw);
      auto fwd_trip = vision::apply_augment(frame, gt[0], fwd, *draw);  // mask result unused
      fwd = std::move(fwd_trip.flow);
    }
    const GrayMap mag_b = vision::flow_magnitude(bwd);
    const GrayMap mag_f = vision::flow_magnitude(fwd);

    for (int i = 0; i < n; ++i) {
      TensorRef warped = cfg_.toggles.warp_mask
                             ? ad::warp_by_flow(carry[static_cast<size_t>(i)], bwd.dx, bwd.dy)
                             : carry[static_cast<size_t>(i)];
      ForwardOut fo = forward_object(f2, warped, mag_b, mag_f, "base/");
      TensorRef loss = ad::weighted_bce(fo.prob, gt[static_cast<size_t>(i)].fg);
      total = total ? ad::add(total, loss) : loss;

      // carry the restricted map; the box is a constant gate, so only the
      // segmentation path takes part in the unrolled gradient
      TensorRef next_carry = fo.prob;
      if (cfg_.toggles.apply_loc) {
        const auto prop = locnet::propose(tensor_to_map(warped), cfg_.loc);
        if (prop) {
          TensorRef delta_t =
              locnet::forward_delta(ad::detach(fo.deepest_app), *prop, params_, "base/loc/",
                                    cfg_.loc, cfg_.seg.pool_factor());
          const locnet::BBoxDelta d{delta_t->data[0], delta_t->data[1], delta_t->data[2],
                                    delta_t->data[3]};
          img::BBox regressed = clamp_box(locnet::apply_delta(*prop, d), w, h);
          if (!regressed.valid()) regressed = *prop;
          next_carry = locnet::restrict_op(
              fo.prob, locnet::enlarge(regressed, cfg_.loc.enlarge_factor, w, h));
        }
      }
      carry[static_cast<size_t>(i)] = next_carry;
    }
  }

  const double lv = total->value();
  if (!std::isfinite(lv))
    throw NumericError("recurrent stage: non-finite loss at video " + video.name + " window " +
                       std::to_string(t0));
  ad::backward(total);
  ad::adam_step(params_, adam);
  return lv;
}

void Engine::online_finetune(const data::VideoRecord& video) {
  if (!video.has_mask(0))
    throw std::runtime_error("online_finetune: video " + video.name + " has no first-frame mask");
  const int n = video.n_objects;
  const img::LabelMask& gt0 = video.masks[0];
  for (int i = 1; i <= n; ++i)
    if (img::mask_for_label(gt0, i).area() == 0)
      throw std::runtime_error("online_finetune: object " + std::to_string(i) +
                               " absent from first-frame ground truth of " + video.name);

  for (int i = 1; i <= n; ++i)
    params_.clone_namespace("base/", "obj" + std::to_string(i) + "/");
  if (cfg_.train.online_iterations <= 0) return;

  FlowSource flows(video, cfg_.flow_params, cfg_.allow_flow_estimation);
  const Frame& frame0 = video.frames[0];
  const int w = frame0.width, h = frame0.height;
  const FlowField& fwd = flows.forward(0);  // stands in for both directions at t = 0

  Rng rng(cfg_.train.seed ^ 0xC3C30003u ^ fnv1a(video.name));
  std::vector<ad::AdamState> states(static_cast<size_t>(n));
  const int iters = cfg_.train.online_iterations;
  for (int it = 0; it < iters; ++it) {
    const float lr =
        cfg_.train.online_lr *
        (1.0f - 0.9f * static_cast<float>(it) / static_cast<float>(std::max(1, iters - 1)));
    for (int i = 1; i <= n; ++i) {
      const std::string prefix = "obj" + std::to_string(i) + "/";
      BinMask gt_i = img::mask_for_label(gt0, i);
      Frame f2 = frame0;
      FlowField fw2 = fwd;
      if (cfg_.train.augment) {
        const auto draw = vision::draw_augment(w, h, vision::AugmentParams{}, rng);
        auto trip = vision::apply_augment(frame0, gt_i, fwd, draw);
        f2 = std::move(trip.frame);
        gt_i = std::move(trip.mask);
        fw2 = std::move(trip.flow);
      }
      const BinMask perturbed = vision::perturb_mask(gt_i, rng);
      const GrayMap carried = img::to_gray(perturbed);  // single frame: no warp, no recurrence

      params_.zero_grads();
      const GrayMap mag = vision::flow_magnitude(fw2);
      TensorRef carried_t = ad::make_tensor({h, w}, carried.v);
      ForwardOut fo = forward_object(f2, carried_t, mag, mag, prefix);
      TensorRef loss = ad::weighted_bce(fo.prob, gt_i.fg);
      if (cfg_.toggles.train_loc) {
        const auto prop = locnet::propose(carried, cfg_.loc);
        const auto gt_box = vision::tight_bbox(gt_i, 1);
        if (prop && gt_box) {
          TensorRef delta = locnet::forward_delta(fo.deepest_app, *prop, params_,
                                                  prefix + "loc/", cfg_.loc,
                                                  cfg_.seg.pool_factor());
          const locnet::BBoxDelta target = locnet::encode_delta(*prop, *gt_box);
          loss = ad::add(loss, ad::scale(ad::smooth_l1(delta, {target.tx, target.ty, target.tw,
                                                               target.th}),
                                         cfg_.train.lambda_bbox));
        }
      }
      const double lv = loss->value();
      if (!std::isfinite(lv))
        throw NumericError("online finetune: non-finite loss for " + video.name + " object " +
                           std::to_string(i));
      ad::backward(loss);
      states[static_cast<size_t>(i - 1)].learning_rate = lr;
      ad::adam_step(params_, states[static_cast<size_t>(i - 1)], prefix);
    }
  }
}

InferOutput Engine::infer(const data::VideoRecord& video) {
  if (!video.has_mask(0))
    throw std::runtime_error("infer: video " + video.name + " has no first-frame mask");
  FlowSource flows(video, cfg_.flow_params, cfg_.allow_flow_estimation);

  InferOutput out;
  out.masks.push_back(video.masks[0]);  // protocol: the given ground truth
  out.boxes.emplace_back(static_cast<size_t>(video.n_objects), std::nullopt);
  out.frame_seconds.push_back(0.0);

  RecurrentState state = initial_state(video.masks[0], video.n_objects);
  for (int t = 1; t < video.frame_count(); ++t) {
    const auto start = std::chrono::steady_clock::now();
    StepResult r = step_frame(state, flows, t, video);
    out.masks.push_back(r.fused);
    out.boxes.push_back(r.boxes);
    state = std::move(r.state);
    out.frame_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return out;
}

}  // namespace rvos::pipeline
