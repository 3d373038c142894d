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

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rvos/rng.hpp"

namespace rvos::ad {

class Tensor;
using TensorRef = std::shared_ptr<Tensor>;

/// Dense row-major f32 tensor. Doubles as a node of the define-by-run
/// reverse-mode graph: ops record their parents and a closure that pushes
/// the node's gradient into them. The graph lives only as long as the
/// TensorRefs built during one forward pass; dropping the root frees it.
///
/// Storage is f32; every reduction inside kernels accumulates in f64.
class Tensor {
 public:
  std::vector<int> shape;
  std::vector<float> data;
  bool requires_grad = false;
  std::vector<float> grad;  // empty until backward touches this node

  // graph edges, populated by ops
  std::vector<TensorRef> parents;
  std::function<void(Tensor&)> backward_op;

  Tensor() = default;
  Tensor(std::vector<int> s, float fill);

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  /// Scalar value of a one-element tensor.
  float value() const;

  void ensure_grad();
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

  /// Drops graph edges so the node behaves like a leaf.
  void sever() {
    parents.clear();
    backward_op = nullptr;
  }
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

TensorRef make_tensor(std::vector<int> shape, float fill = 0.0f);
TensorRef make_tensor(std::vector<int> shape, std::vector<float> values);
/// Leaf with requires_grad set; the unit every optimizer step touches.
TensorRef make_param(std::vector<int> shape, std::vector<float> values);

/// Value copy with no graph history and no grad requirement.
TensorRef detach(const TensorRef& t);

/// Reverse pass from a scalar root: seeds d(root)/d(root) = 1 and runs each
/// node's backward_op in reverse topological order. Nodes are visited once
/// even when shared (parameters reused across frames accumulate gradients).
void backward(const TensorRef& root);

// ---- ops ----------------------------------------------------------------

/// 2-D convolution. input is [C,H,W] or [N,C,H,W]; kernel [O,C,kh,kw];
/// bias [O]. Output spatial extent floor((H + 2 pad - k)/stride) + 1.
TensorRef conv2d(const TensorRef& input, const TensorRef& kernel, const TensorRef& bias,
                 int stride, int pad);

TensorRef relu(const TensorRef& x);
TensorRef sigmoid(const TensorRef& x);

/// 2x2 max pooling with stride 2 over the trailing two dims (floor on odd).
TensorRef max_pool_2x2(const TensorRef& x);

/// Bilinear resize of the trailing two dims to (out_h, out_w), half-pixel
/// centers, edge clamped. Backward is the exact transpose of the forward
/// interpolation weights.
TensorRef upsample_bilinear(const TensorRef& x, int out_h, int out_w);

/// y = W x + b with x [n_in], W [n_out, n_in], b [n_out].
TensorRef fully_connected(const TensorRef& x, const TensorRef& weight, const TensorRef& bias);

TensorRef add(const TensorRef& a, const TensorRef& b);  // same shape
TensorRef scale(const TensorRef& x, float s);
/// Elementwise product with a constant gate (no gradient into the gate).
TensorRef mul_gate(const TensorRef& x, std::vector<float> gate);
/// y = x * s[0] and y = x + b[0] with learnable scalars.
TensorRef scale_by_param(const TensorRef& x, const TensorRef& s);
TensorRef add_scalar_param(const TensorRef& x, const TensorRef& b);
TensorRef flatten(const TensorRef& x);
TensorRef reshape(const TensorRef& x, std::vector<int> shape);  // same numel
/// Keeps the top-left out_h x out_w window of the trailing two dims.
TensorRef crop2d(const TensorRef& x, int out_h, int out_w);
/// Zero-pads the trailing two dims on the bottom/right to out_h x out_w.
TensorRef pad2d(const TensorRef& x, int out_h, int out_w);
/// Concatenation along the channel dim of [C,H,W] / [N,C,H,W] tensors.
TensorRef concat_channels(const std::vector<TensorRef>& parts);

/// Max-pools the box interior of feature [C,h,w] onto a grid x grid output.
/// The box is given in input-image pixels and projected by total_stride;
/// degenerate projections expand to one cell. Gradient routes to argmaxes.
TensorRef roi_pool(const TensorRef& feature, float x_min, float y_min, float x_max, float y_max,
                   int grid, int total_stride);

/// out(p) = bilinear(map, p + flow(p)) over an [H,W] map; samples outside
/// the image read 0. Differentiable in the map, flow held constant.
TensorRef warp_by_flow(const TensorRef& map, const std::vector<float>& flow_dx,
                       const std::vector<float>& flow_dy);

/// Class-balanced binary cross entropy over an [H,W] probability map:
///   loss = -(w_fg * sum_fg log p + w_bg * sum_bg log(1-p)) / (H*W)
/// with w_fg = |bg|/|all|, w_bg = |fg|/|all|. p clamped to [eps, 1-eps],
/// eps = 1e-7. target holds 0/1 per pixel.
TensorRef weighted_bce(const TensorRef& pred, const std::vector<uint8_t>& target);

/// Sum over coordinates of 0.5 d^2 (|d| < 1) else |d| - 0.5, d = pred - target.
TensorRef smooth_l1(const TensorRef& pred, const std::vector<float>& target);

/// Kaiming-uniform fill: U(-b, b) with b = sqrt(6 / fan_in).
std::vector<float> kaiming_uniform(int64_t count, int64_t fan_in, Rng& rng);

}  // namespace rvos::ad
