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

#include "rvos/locnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rvos/vision_ops.hpp"

namespace rvos::locnet {

using ad::TensorRef;

void LocConfig::validate() const {
  if (roi_grid < 1) throw std::invalid_argument("locnet: roi_grid must be >= 1");
  if (enlarge_factor < 1.0f) throw std::invalid_argument("locnet: enlarge factor must be >= 1");
  if (fc_width < 1) throw std::invalid_argument("locnet: fc width must be >= 1");
  if (proposal_threshold <= 0.0f || proposal_threshold >= 1.0f)
    throw std::invalid_argument("locnet: proposal threshold must be in (0,1)");
}

void init_params(ad::ParamStore& params, const LocConfig& cfg, int feature_channels,
                 const std::string& prefix, Rng& rng) {
  cfg.validate();
  const int in1 = feature_channels * cfg.roi_grid * cfg.roi_grid;
  params.add(prefix + "fc1/w",
             ad::make_tensor({cfg.fc_width, in1},
                             ad::kaiming_uniform(static_cast<int64_t>(cfg.fc_width) * in1, in1,
                                                 rng)));
  params.add(prefix + "fc1/b", ad::make_tensor({cfg.fc_width}, 0.0f));
  params.add(prefix + "fc2/w",
             ad::make_tensor({4, cfg.fc_width},
                             ad::kaiming_uniform(4 * static_cast<int64_t>(cfg.fc_width),
                                                 cfg.fc_width, rng)));
  params.add(prefix + "fc2/b", ad::make_tensor({4}, 0.0f));
}

std::optional<img::BBox> propose(const img::GrayMap& warped_prob, const LocConfig& cfg) {
  return vision::tight_bbox(img::threshold(warped_prob, cfg.proposal_threshold),
                            cfg.min_proposal_area);
}

TensorRef forward_delta(const TensorRef& deepest_app, const img::BBox& proposal,
                        const ad::ParamStore& params, const std::string& prefix,
                        const LocConfig& cfg, int total_stride) {
  TensorRef pooled = ad::roi_pool(deepest_app, proposal.x_min, proposal.y_min, proposal.x_max,
                                  proposal.y_max, cfg.roi_grid, total_stride);
  TensorRef h = ad::relu(ad::fully_connected(ad::flatten(pooled), params.get(prefix + "fc1/w"),
                                             params.get(prefix + "fc1/b")));
  return ad::fully_connected(h, params.get(prefix + "fc2/w"), params.get(prefix + "fc2/b"));
}

BBoxDelta encode_delta(const img::BBox& proposal, const img::BBox& gt) {
  if (proposal.width() <= 0 || proposal.height() <= 0 || gt.width() <= 0 || gt.height() <= 0)
    throw std::invalid_argument("encode_delta: non-positive box extent");
  BBoxDelta d;
  d.tx = (gt.center_x() - proposal.center_x()) / proposal.width();
  d.ty = (gt.center_y() - proposal.center_y()) / proposal.height();
  d.tw = std::log(gt.width() / proposal.width());
  d.th = std::log(gt.height() / proposal.height());
  return d;
}

img::BBox apply_delta(const img::BBox& proposal, const BBoxDelta& delta) {
  if (proposal.width() <= 0 || proposal.height() <= 0)
    throw std::invalid_argument("apply_delta: non-positive proposal extent");
  const float cx = proposal.center_x() + delta.tx * proposal.width();
  const float cy = proposal.center_y() + delta.ty * proposal.height();
  const float w = proposal.width() * std::exp(delta.tw);
  const float h = proposal.height() * std::exp(delta.th);
  return img::BBox{cx - 0.5f * w, cy - 0.5f * h, cx + 0.5f * w, cy + 0.5f * h};
}

img::BBox enlarge(const img::BBox& box, float factor, int image_w, int image_h) {
  const float w = box.width() * factor, h = box.height() * factor;
  img::BBox out{box.center_x() - 0.5f * w, box.center_y() - 0.5f * h, box.center_x() + 0.5f * w,
                box.center_y() + 0.5f * h};
  out.x_min = std::max(0.0f, out.x_min);
  out.y_min = std::max(0.0f, out.y_min);
  out.x_max = std::min(static_cast<float>(image_w), out.x_max);
  out.y_max = std::min(static_cast<float>(image_h), out.y_max);
  return out;
}

namespace {
std::vector<float> box_gate(int w, int h, const img::BBox& box) {
  std::vector<float> gate(static_cast<size_t>(w) * h, 0.0f);
  for (int y = 0; y < h; ++y) {
    if (y < box.y_min || y >= box.y_max) continue;
    for (int x = 0; x < w; ++x)
      if (x >= box.x_min && x < box.x_max) gate[static_cast<size_t>(y) * w + x] = 1.0f;
  }
  return gate;
}
}  // namespace

img::GrayMap restrict_map(const img::GrayMap& prob, const img::BBox& box) {
  img::GrayMap out(prob.width, prob.height);
  const auto gate = box_gate(prob.width, prob.height, box);
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = prob.v[i] * gate[i];
  return out;
}

TensorRef restrict_op(const TensorRef& prob, const img::BBox& box) {
  if (prob->rank() != 2) throw std::invalid_argument("restrict_op: [H,W] map expected");
  return ad::mul_gate(prob, box_gate(prob->dim(1), prob->dim(0), box));
}

}  // namespace rvos::locnet
