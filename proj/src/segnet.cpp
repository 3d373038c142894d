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

#include "rvos/segnet.hpp"

#include <stdexcept>

namespace rvos::segnet {

using ad::TensorRef;

void SegNetConfig::validate() const {
  if (stages.size() < 2) throw std::invalid_argument("segnet: at least 2 stages required");
  for (const auto& s : stages)
    if (s.convs < 1 || s.width < 1)
      throw std::invalid_argument("segnet: stage extents must be >= 1");
  if (appearance_channels < 1 || flow_channels < 1)
    throw std::invalid_argument("segnet: stream channel counts must be >= 1");
}

namespace {

void init_stream(ad::ParamStore& params, const SegNetConfig& cfg, const std::string& sp,
                 int in_channels, Rng& rng) {
  int c_in = in_channels;
  for (size_t si = 0; si < cfg.stages.size(); ++si) {
    const int width = cfg.stages[si].width;
    for (int ci = 0; ci < cfg.stages[si].convs; ++ci) {
      const std::string base = sp + "s" + std::to_string(si) + "c" + std::to_string(ci);
      const int64_t fan_in = static_cast<int64_t>(c_in) * 9;
      params.add(base + "/w",
                 ad::make_tensor({width, c_in, 3, 3},
                                 ad::kaiming_uniform(static_cast<int64_t>(width) * c_in * 9,
                                                     fan_in, rng)));
      params.add(base + "/b", ad::make_tensor({width}, 0.0f));
      c_in = width;
    }
    const std::string side = sp + "side" + std::to_string(si);
    params.add(side + "/w",
               ad::make_tensor({1, width, 1, 1}, ad::kaiming_uniform(width, width, rng)));
    params.add(side + "/b", ad::make_tensor({1}, 0.0f));
  }
  const int n_stages = static_cast<int>(cfg.stages.size());
  params.add(sp + "hyper/w",
             ad::make_tensor({1, n_stages, 1, 1}, ad::kaiming_uniform(n_stages, n_stages, rng)));
  params.add(sp + "hyper/b", ad::make_tensor({1}, 0.0f));
}

}  // namespace

void init_params(ad::ParamStore& params, const SegNetConfig& cfg, const std::string& prefix,
                 Rng& rng) {
  cfg.validate();
  init_stream(params, cfg, prefix + "app/", cfg.appearance_channels, rng);
  init_stream(params, cfg, prefix + "flo/", cfg.flow_channels, rng);
  params.add(prefix + "fuse/wa", ad::make_tensor({1}, 0.5f));
  params.add(prefix + "fuse/wf", ad::make_tensor({1}, 0.5f));
  params.add(prefix + "fuse/b", ad::make_tensor({1}, 0.0f));
}

StreamOutput forward_stream(const TensorRef& input, const ad::ParamStore& params,
                            const std::string& sp, const SegNetConfig& cfg) {
  if (input->rank() != 3)
    throw std::invalid_argument("forward_stream: input must be [C,H,W], got " +
                                ad::shape_str(input->shape));
  const int h = input->dim(1), w = input->dim(2);
  const int factor = cfg.pool_factor();
  if (h % factor != 0 || w % factor != 0)
    throw std::invalid_argument("forward_stream: " + std::to_string(h) + "x" +
                                std::to_string(w) + " not divisible by pool factor " +
                                std::to_string(factor));

  TensorRef x = input;
  std::vector<TensorRef> sides;
  for (size_t si = 0; si < cfg.stages.size(); ++si) {
    for (int ci = 0; ci < cfg.stages[si].convs; ++ci) {
      const std::string base = sp + "s" + std::to_string(si) + "c" + std::to_string(ci);
      x = ad::relu(ad::conv2d(x, params.get(base + "/w"), params.get(base + "/b"), 1, 1));
    }
    const std::string side = sp + "side" + std::to_string(si);
    TensorRef resp = ad::conv2d(x, params.get(side + "/w"), params.get(side + "/b"), 1, 0);
    if (resp->dim(1) != h || resp->dim(2) != w) resp = ad::upsample_bilinear(resp, h, w);
    sides.push_back(resp);
    if (si + 1 < cfg.stages.size()) x = ad::max_pool_2x2(x);
  }
  TensorRef hyper = ad::conv2d(ad::concat_channels(sides), params.get(sp + "hyper/w"),
                               params.get(sp + "hyper/b"), 1, 0);
  return {hyper, x};
}

SegForward forward_seg(const TensorRef& app_input, const TensorRef& flow_input,
                       const ad::ParamStore& params, const std::string& prefix,
                       const SegNetConfig& cfg) {
  StreamOutput app = forward_stream(app_input, params, prefix + "app/", cfg);
  TensorRef combined = ad::scale_by_param(app.side, params.get(prefix + "fuse/wa"));
  if (flow_input) {
    StreamOutput flo = forward_stream(flow_input, params, prefix + "flo/", cfg);
    combined = ad::add(combined, ad::scale_by_param(flo.side, params.get(prefix + "fuse/wf")));
  }
  combined = ad::add_scalar_param(combined, params.get(prefix + "fuse/b"));
  const int h = app_input->dim(1), w = app_input->dim(2);
  return {ad::sigmoid(ad::reshape(combined, {h, w})), app.deepest};
}

}  // namespace rvos::segnet
