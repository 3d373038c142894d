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

#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rvos/dataset.hpp"
#include "rvos/flow.hpp"
#include "rvos/fusion.hpp"
#include "rvos/locnet.hpp"
#include "rvos/optim.hpp"
#include "rvos/segnet.hpp"

namespace rvos::pipeline {

/// Component switches mirroring the ablation axes: appearance stream is
/// always on; each switch gates exactly one code path.
struct Toggles {
  bool flow_stream = true;  // second stream consuming flow magnitudes
  bool warp_mask = true;    // warp the carried mask along the flow
  bool train_loc = true;    // add the box regression loss when training
  bool apply_loc = true;    // restrict predictions to the regressed box
  bool recurrent = true;    // run the unrolled training stage
};

struct TrainConfig {
  int epochs = 10;
  int window = 7;  // frames per unrolled window
  float base_lr = 1e-3f;     // nets train from scratch, not from pretrained weights
  float epoch_decay = 0.9f;  // lr multiplier per epoch
  int online_iterations = 200;
  float online_lr = 1e-3f;  // decays linearly to 0.1x over the iterations
  float lambda_bbox = 1.0f;
  bool augment = true;
  int windows_per_video = 1;  // unrolled-stage samples per video per epoch
  uint32_t seed = 0;
};

struct PipelineConfig {
  segnet::SegNetConfig seg;
  locnet::LocConfig loc;
  fusion::FusionConfig fuse;
  flow::FlowParams flow_params;
  bool allow_flow_estimation = true;
  TrainConfig train;
  Toggles toggles;
};

/// Raised when a loss turns non-finite; the CLI maps it to exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-video flow access: sidecar fields win, else Horn-Schunck estimation,
/// else a named error. Estimated fields are cached. At the sequence ends
/// the missing direction reuses the other one (magnitude consumers only).
class FlowSource {
 public:
  FlowSource(const data::VideoRecord& video, const flow::FlowParams& params,
             bool allow_estimation);

  const img::FlowField& backward(int t);  // t -> t-1, t >= 1
  const img::FlowField& forward(int t);   // t -> t+1, t <= T-2
  /// |flow t -> t+1|; the last frame reuses the backward field instead.
  img::GrayMap forward_magnitude(int t);

 private:
  const data::VideoRecord* video_;
  flow::FlowParams params_;
  bool allow_estimation_;
  std::map<int, img::FlowField> bwd_cache_, fwd_cache_;
};

struct RecurrentState {
  std::vector<img::ProbMap> prev_maps;  // post-restriction b_{t-1} per object
  std::vector<std::optional<img::BBox>> last_box;
};

struct StepResult {
  std::vector<img::ProbMap> probs;
  std::vector<std::optional<img::BBox>> boxes;  // applied (enlarged) boxes
  img::LabelMask fused;
  RecurrentState state;
};

struct EpochStats {
  double mean_loss = 0.0;
  int samples = 0;
};

struct InferOutput {
  std::vector<img::LabelMask> masks;
  std::vector<std::vector<std::optional<img::BBox>>> boxes;  // [frame][object]
  std::vector<double> frame_seconds;
};

class Engine {
 public:
  Engine(PipelineConfig cfg, ad::ParamStore params);

  /// Fresh generic parameters under "base/" seeded from cfg.train.seed.
  static Engine create(const PipelineConfig& cfg);

  const PipelineConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  RecurrentState initial_state(const img::LabelMask& first_gt, int n_objects) const;

  /// One frame of the recurrence: warp carried maps, run the per-object
  /// nets, regress/apply boxes, fuse. Inference-only (no graph).
  StepResult step_frame(const RecurrentState& state, FlowSource& flows, int t,
                        const data::VideoRecord& video);

  /// Stage 1: per-frame samples with perturbed previous-frame masks.
  std::vector<EpochStats> train_static(const std::vector<data::VideoRecord>& videos);

  /// Stage 2: unrolled windows; gradients flow through the warped carries
  /// into earlier frames' outputs. One optimizer step per window.
  /// window == 1 degenerates to the static stage.
  std::vector<EpochStats> train_recurrent(const std::vector<data::VideoRecord>& videos);

  /// Per-object specialization on the first annotated frame; recurrence off.
  void online_finetune(const data::VideoRecord& video);

  InferOutput infer(const data::VideoRecord& video);

 private:
  struct ForwardOut {
    ad::TensorRef prob;
    ad::TensorRef deepest_app;
  };
  ForwardOut forward_object(const img::Frame& frame, const ad::TensorRef& carried_mask,
                            const img::GrayMap& mag_bwd, const img::GrayMap& mag_fwd,
                            const std::string& prefix);
  ad::TensorRef static_sample_loss(const data::VideoRecord& video, FlowSource& flows, int t,
                                   int obj, Rng& rng);
  double window_step(const data::VideoRecord& video, FlowSource& flows, int t0, int w_eff,
                     Rng& rng, ad::AdamState& adam);
  std::string object_prefix(int object_id) const;

  PipelineConfig cfg_;
  ad::ParamStore params_;
};

}  // namespace rvos::pipeline
