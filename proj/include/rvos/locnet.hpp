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

#include <optional>
#include <string>

#include "rvos/image.hpp"
#include "rvos/optim.hpp"
#include "rvos/tensor.hpp"

namespace rvos::locnet {

struct LocConfig {
  int roi_grid = 7;
  float proposal_threshold = 0.5f;
  int min_proposal_area = 9;
  float enlarge_factor = 1.25f;
  int fc_width = 256;
  float lost_enlarge_factor = 1.5f;  // reuse of the last valid box when lost

  void validate() const;
};

/// Box regression targets, dimensionless: offsets relative to the proposal
/// size plus log size ratios.
struct BBoxDelta {
  float tx = 0, ty = 0, tw = 0, th = 0;
};

/// fc1: [fc_width, C*grid*grid], fc2: [4, fc_width], created under `prefix`
/// (e.g. "base/loc/").
void init_params(ad::ParamStore& params, const LocConfig& cfg, int feature_channels,
                 const std::string& prefix, Rng& rng);

/// Tight box of the thresholded map; absent below the area floor.
std::optional<img::BBox> propose(const img::GrayMap& warped_prob, const LocConfig& cfg);

/// RoI-pools the deepest appearance feature over the proposal and regresses
/// a delta through two fully connected layers. Output tensor is [4].
ad::TensorRef forward_delta(const ad::TensorRef& deepest_app, const img::BBox& proposal,
                            const ad::ParamStore& params, const std::string& prefix,
                            const LocConfig& cfg, int total_stride);

BBoxDelta encode_delta(const img::BBox& proposal, const img::BBox& gt);
img::BBox apply_delta(const img::BBox& proposal, const BBoxDelta& delta);

/// Width/height scaled by `factor` about the center, clamped to the image.
img::BBox enlarge(const img::BBox& box, float factor, int image_w, int image_h);

/// Zeroes probabilities outside the box; inside unchanged. Idempotent.
img::GrayMap restrict_map(const img::GrayMap& prob, const img::BBox& box);
/// Same gating as a differentiable op (gradient passes inside the box).
ad::TensorRef restrict_op(const ad::TensorRef& prob, const img::BBox& box);

}  // namespace rvos::locnet
