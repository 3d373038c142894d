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

#include <string>
#include <vector>

#include "rvos/optim.hpp"
#include "rvos/tensor.hpp"

namespace rvos::segnet {

struct StageSpec {
  int convs = 2;
  int width = 16;
};

/// Two identical stream backbones: per stage, 3x3 convs + ReLU, then 2x2
/// max pooling between stages. Each stage's pre-pool activation feeds a
/// 1x1 side projection, upsampled to input size and linearly combined into
/// one response channel per stream; the two stream responses are fused by
/// a learned scalar affine and squashed by a sigmoid.
struct SegNetConfig {
  std::vector<StageSpec> stages{{2, 16}, {2, 32}, {2, 64}, {2, 64}, {2, 64}};
  int appearance_channels = 4;  // RGB + carried mask
  int flow_channels = 3;        // two flow magnitudes + carried mask
  float flow_magnitude_scale = 0.25f;

  int pool_factor() const { return 1 << (static_cast<int>(stages.size()) - 1); }
  void validate() const;
};

/// Creates every stream/fusion parameter under `prefix` (e.g. "base/seg/").
/// Parameter creation order is fixed, so a seeded rng reproduces exactly.
void init_params(ad::ParamStore& params, const SegNetConfig& cfg, const std::string& prefix,
                 Rng& rng);

struct StreamOutput {
  ad::TensorRef side;     // [1,H,W] combined hypercolumn response
  ad::TensorRef deepest;  // last stage's post-ReLU feature map
};

/// stream_prefix example: "base/seg/app/". input is [C,H,W] with H,W
/// divisible by the pool factor.
StreamOutput forward_stream(const ad::TensorRef& input, const ad::ParamStore& params,
                            const std::string& stream_prefix, const SegNetConfig& cfg);

struct SegForward {
  ad::TensorRef prob;         // [H,W] in (0,1)
  ad::TensorRef deepest_app;  // appearance feature for RoI pooling
};

/// flow_input may be null: the appearance-only setting, computed as
/// sigmoid(w_a * side_a + c) with the same fusion parameters.
SegForward forward_seg(const ad::TensorRef& app_input, const ad::TensorRef& flow_input,
                       const ad::ParamStore& params, const std::string& prefix,
                       const SegNetConfig& cfg);

}  // namespace rvos::segnet
