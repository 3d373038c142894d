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
//
// Finite-difference sweep over every differentiable op, against the f64
// reference kernels. Shared by the acceptance suite.

#pragma once

#include <string>
#include <vector>

#include "oracle.hpp"
#include "rvos/rng.hpp"
#include "rvos/tensor.hpp"

namespace grad_suite {

struct OpResult {
  std::string op;
  double worst = 0.0;
  bool pass(double tol = 1e-3) const { return worst < tol; }
};

namespace detail {

using oracle::Vec;
using rvos::Rng;
using rvos::ad::TensorRef;

inline std::vector<float> uniform_vec(size_t n, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  std::vector<float> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

inline std::vector<float> margin_vec(size_t n, Rng& rng, float margin = 0.05f) {
  auto v = uniform_vec(n, rng);
  for (auto& x : v)
    if (std::abs(x) < margin) x += x >= 0 ? margin : -margin;
  return v;
}

// pairwise-distinct values keep every argmax stable under the fd step
inline std::vector<float> distinct_vec(size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (size_t i = 0; i < n; ++i)
    v[i] = -0.005f * static_cast<float>(n) + 0.01f * static_cast<float>(i);
  rng.shuffle(v);
  return v;
}

inline void seed_output_grad(const TensorRef& out, const Vec& probe) {
  out->ensure_grad();
  for (int64_t i = 0; i < out->numel(); ++i) out->grad[i] = static_cast<float>(probe[i]);
  out->backward_op(*out);
}

}  // namespace detail

inline std::vector<OpResult> run(int instances) {
  using namespace detail;
  std::vector<OpResult> results;
  Rng rng(20260808u);

  {  // conv2d: input, kernel, and bias gradients
    OpResult r{"conv2d"};
    for (int inst = 0; inst < instances; ++inst) {
      const int n = 2, c = 3, h = 8, w = 8, o = 4, kk = 3;
      const int stride = inst % 2 ? 2 : 1, pad = inst % 3 ? 1 : 0;
      auto in_v = uniform_vec(static_cast<size_t>(n) * c * h * w, rng);
      auto k_v = uniform_vec(static_cast<size_t>(o) * c * kk * kk, rng);
      auto b_v = uniform_vec(o, rng);
      auto in = rvos::ad::make_param({n, c, h, w}, in_v);
      auto k = rvos::ad::make_param({o, c, kk, kk}, k_v);
      auto b = rvos::ad::make_param({o}, b_v);
      auto out = rvos::ad::conv2d(in, k, b, stride, pad);
      const Vec probe = oracle::random_probe(static_cast<size_t>(out->numel()), rng);
      seed_output_grad(out, probe);
      auto loss = [&](const Vec& iv, const Vec& kv, const Vec& bv) {
        return oracle::dot(oracle::conv2d_ref(iv, n, c, h, w, kv, o, kk, kk, bv, stride, pad),
                           probe);
      };
      r.worst = std::max(
          r.worst,
          oracle::max_rel_err(in->grad, oracle::fd_gradient(
                                            [&](const Vec& x) {
                                              return loss(x, oracle::to_f64(k_v),
                                                          oracle::to_f64(b_v));
                                            },
                                            oracle::to_f64(in_v))));
      r.worst = std::max(
          r.worst,
          oracle::max_rel_err(k->grad, oracle::fd_gradient(
                                           [&](const Vec& x) {
                                             return loss(oracle::to_f64(in_v), x,
                                                         oracle::to_f64(b_v));
                                           },
                                           oracle::to_f64(k_v))));
      r.worst = std::max(
          r.worst,
          oracle::max_rel_err(b->grad, oracle::fd_gradient(
                                           [&](const Vec& x) {
                                             return loss(oracle::to_f64(in_v),
                                                         oracle::to_f64(k_v), x);
                                           },
                                           oracle::to_f64(b_v))));
    }
    results.push_back(r);
  }

  {  // 2x2 max pooling
    OpResult r{"max_pool_2x2"};
    for (int inst = 0; inst < instances; ++inst) {
      const int planes = 3, h = 6, w = 6;
      auto v = distinct_vec(static_cast<size_t>(planes) * h * w, rng);
      auto in = rvos::ad::make_param({planes, h, w}, v);
      auto out = rvos::ad::max_pool_2x2(in);
      const Vec probe = oracle::random_probe(static_cast<size_t>(out->numel()), rng);
      seed_output_grad(out, probe);
      const Vec fd = oracle::fd_gradient(
          [&](const Vec& x) { return oracle::dot(oracle::pool2_ref(x, planes, h, w), probe); },
          oracle::to_f64(v));
      r.worst = std::max(r.worst, oracle::max_rel_err(in->grad, fd));
    }
    results.push_back(r);
  }

  {  // bilinear upsample
    OpResult r{"upsample_bilinear"};
    for (int inst = 0; inst < instances; ++inst) {
      const int planes = 2, h = 2 + inst % 3, w = 2 + (inst / 3) % 3;
      const int oh = h * 2, ow = w * 2 + 1;
      auto v = uniform_vec(static_cast<size_t>(planes) * h * w, rng);
      auto in = rvos::ad::make_param({planes, h, w}, v);
      auto out = rvos::ad::upsample_bilinear(in, oh, ow);
      const Vec probe = oracle::random_probe(static_cast<size_t>(out->numel()), rng);
      seed_output_grad(out, probe);
      const Vec fd = oracle::fd_gradient(
          [&](const Vec& x) {
            return oracle::dot(oracle::upsample_ref(x, planes, h, w, oh, ow), probe);
          },
          oracle::to_f64(v));
      r.worst = std::max(r.worst, oracle::max_rel_err(in->grad, fd));
    }
    results.push_back(r);
  }

  {  // fully connected
    OpResult r{"fully_connected"};
    for (int inst = 0; inst < instances; ++inst) {
      const int n_in = 10, n_out = 5;
      auto xv = uniform_vec(n_in, rng);
      auto wv = uniform_vec(static_cast<size_t>(n_out) * n_in, rng);
      auto bv = uniform_vec(n_out, rng);
      auto x = rvos::ad::make_param({n_in}, xv);
      auto wgt = rvos::ad::make_param({n_out, n_in}, wv);
      auto b = rvos::ad::make_param({n_out}, bv);
      auto out = rvos::ad::fully_connected(x, wgt, b);
      const Vec probe = oracle::random_probe(n_out, rng);
      seed_output_grad(out, probe);
      auto loss = [&](const Vec& xa, const Vec& wa, const Vec& ba) {
        return oracle::dot(oracle::fc_ref(xa, wa, ba, n_out, n_in), probe);
      };
      r.worst = std::max(r.worst, oracle::max_rel_err(
                                      x->grad, oracle::fd_gradient(
                                                   [&](const Vec& t) {
                                                     return loss(t, oracle::to_f64(wv),
                                                                 oracle::to_f64(bv));
                                                   },
                                                   oracle::to_f64(xv))));
      r.worst = std::max(r.worst, oracle::max_rel_err(
                                      wgt->grad, oracle::fd_gradient(
                                                     [&](const Vec& t) {
                                                       return loss(oracle::to_f64(xv), t,
                                                                   oracle::to_f64(bv));
                                                     },
                                                     oracle::to_f64(wv))));
      r.worst = std::max(r.worst, oracle::max_rel_err(
                                      b->grad, oracle::fd_gradient(
                                                   [&](const Vec& t) {
                                                     return loss(oracle::to_f64(xv),
                                                                 oracle::to_f64(wv), t);
                                                   },
                                                   oracle::to_f64(bv))));
    }
    results.push_back(r);
  }

  {  // sigmoid
    OpResult r{"sigmoid"};
    for (int inst = 0; inst < instances; ++inst) {
      auto v = uniform_vec(16, rng, -3.0f, 3.0f);
      auto in = rvos::ad::make_param({16}, v);
      auto out = rvos::ad::sigmoid(in);
      const Vec probe = oracle::random_probe(16, rng);
      seed_output_grad(out, probe);
      const Vec fd = oracle::fd_gradient(
          [&](const Vec& x) { return oracle::dot(oracle::sigmoid_ref(x), probe); },
          oracle::to_f64(v));
      r.worst = std::max(r.worst, oracle::max_rel_err(in->grad, fd));
    }
    results.push_back(r);
  }

  {  // class-balanced binary cross entropy
    OpResult r{"weighted_bce"};
    for (int inst = 0; inst < instances; ++inst) {
      auto v = uniform_vec(16, rng, 0.05f, 0.95f);
      std::vector<uint8_t> tgt(16);
      for (auto& t : tgt) t = rng.bernoulli(0.4f) ? 1 : 0;
      auto in = rvos::ad::make_param({4, 4}, v);
      auto loss = rvos::ad::weighted_bce(in, tgt);
      rvos::ad::backward(loss);
      const Vec fd = oracle::fd_gradient(
          [&](const Vec& x) { return oracle::wbce_ref(x, tgt); }, oracle::to_f64(v), 1e-4);
      r.worst = std::max(r.worst, oracle::max_rel_err(in->grad, fd));
    }
    results.push_back(r);
  }

  {  // smooth l1
    OpResult r{"smooth_l1"};
    for (int inst = 0; inst < instances; ++inst) {
      std::vector<float> v(4), t(4);
      for (int i = 0; i < 4; ++i) {
        v[static_cast<size_t>(i)] = rng.uniform(-2.0f, 2.0f);
        t[static_cast<size_t>(i)] = rng.uniform(-2.0f, 2.0f);
        const float d = v[static_cast<size_t>(i)] - t[static_cast<size_t>(i)];
        if (std::abs(std::abs(d) - 1.0f) < 0.05f) v[static_cast<size_t>(i)] += 0.1f;
      }
      auto in = rvos::ad::make_param({4}, v);
      auto loss = rvos::ad::smooth_l1(in, t);
      rvos::ad::backward(loss);
      const Vec fd = oracle::fd_gradient(
          [&](const Vec& x) { return oracle::smooth_l1_ref(x, oracle::to_f64(t)); },
          oracle::to_f64(v));
      r.worst = std::max(r.worst, oracle::max_rel_err(in->grad, fd));
    }
    results.push_back(r);
  }

  {  // roi pooling
    OpResult r{"roi_pool"};
    for (int inst = 0; inst < instances; ++inst) {
      const int c = 4, h = 8, w = 8, grid = 3, stride = 2;
      auto v = distinct_vec(static_cast<size_t>(c) * h * w, rng);
      const float x0 = rng.uniform(0.0f, 6.0f) * stride;
      const float y0 = rng.uniform(0.0f, 6.0f) * stride;
      const float x1 = x0 + rng.uniform(2.0f, 8.0f) * stride;
      const float y1 = y0 + rng.uniform(2.0f, 8.0f) * stride;
      auto in = rvos::ad::make_param({c, h, w}, v);
      auto out = rvos::ad::roi_pool(in, x0, y0, x1, y1, grid, stride);
      const Vec probe = oracle::random_probe(static_cast<size_t>(out->numel()), rng);
      seed_output_grad(out, probe);
      const Vec fd = oracle::fd_gradient(
          [&](const Vec& x) {
            return oracle::dot(oracle::roi_pool_ref(x, c, h, w, x0, y0, x1, y1, grid, stride),
                               probe);
          },
          oracle::to_f64(v));
      r.worst = std::max(r.worst, oracle::max_rel_err(in->grad, fd));
    }
    results.push_back(r);
  }

  {  // backward warping w.r.t. the map
    OpResult r{"warp_backward"};
    for (int inst = 0; inst < instances; ++inst) {
      const int h = 6, w = 7;
      auto v = uniform_vec(static_cast<size_t>(h) * w, rng);
      std::vector<float> dx(static_cast<size_t>(h) * w), dy(dx.size());
      for (auto& d : dx) d = rng.uniform(-2.0f, 2.0f);
      for (auto& d : dy) d = rng.uniform(-2.0f, 2.0f);
      auto in = rvos::ad::make_param({h, w}, v);
      auto out = rvos::ad::warp_by_flow(in, dx, dy);
      const Vec probe = oracle::random_probe(static_cast<size_t>(out->numel()), rng);
      seed_output_grad(out, probe);
      const Vec fd = oracle::fd_gradient(
          [&](const Vec& x) {
            return oracle::dot(oracle::warp_ref(x, h, w, oracle::to_f64(dx), oracle::to_f64(dy)),
                               probe);
          },
          oracle::to_f64(v));
      r.worst = std::max(r.worst, oracle::max_rel_err(in->grad, fd));
    }
    results.push_back(r);
  }

  return results;
}

}  // namespace grad_suite
