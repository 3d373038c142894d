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

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "rvos/parallel.hpp"
#include "rvos/tensor.hpp"

namespace rvos::ad {

namespace {

constexpr double kBceEps = 1e-7;

TensorRef make_result(std::vector<int> shape, const std::vector<TensorRef>& inputs) {
  auto out = make_tensor(std::move(shape));
  for (const auto& in : inputs)
    if (in->requires_grad) out->requires_grad = true;
  if (out->requires_grad) out->parents = inputs;
  return out;
}

void accumulate(Tensor& dst, const std::vector<float>& delta) {
  dst.ensure_grad();
  for (size_t i = 0; i < delta.size(); ++i) dst.grad[i] += delta[i];
}

// Splits [..., H, W] into (leading planes, H, W).
void trailing_hw(const Tensor& t, int64_t& planes, int& h, int& w) {
  if (t.rank() < 2) throw std::invalid_argument("op needs rank >= 2, got " + shape_str(t.shape));
  h = t.dim(t.rank() - 2);
  w = t.dim(t.rank() - 1);
  planes = 1;
  for (int i = 0; i < t.rank() - 2; ++i) planes *= t.dim(i);
}

// column matrix: rows C*kh*kw, cols h_out*w_out
void im2col(const float* src, int c, int h, int w, int kh, int kw, int stride, int pad, int h_out,
            int w_out, float* col) {
  const int64_t plane = static_cast<int64_t>(h_out) * w_out;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        float* row = col + ((static_cast<int64_t>(ch) * kh + ki) * kw + kj) * plane;
        for (int y = 0; y < h_out; ++y) {
          const int sy = y * stride - pad + ki;
          float* out_row = row + static_cast<int64_t>(y) * w_out;
          if (sy < 0 || sy >= h) {
            std::fill(out_row, out_row + w_out, 0.0f);
            continue;
          }
          const float* in_row = src + (static_cast<int64_t>(ch) * h + sy) * w;
          for (int x = 0; x < w_out; ++x) {
            const int sx = x * stride - pad + kj;
            out_row[x] = (sx < 0 || sx >= w) ? 0.0f : in_row[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, int c, int h, int w, int kh, int kw, int stride, int pad,
                int h_out, int w_out, float* dst) {
  const int64_t plane = static_cast<int64_t>(h_out) * w_out;
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const float* row = col + ((static_cast<int64_t>(ch) * kh + ki) * kw + kj) * plane;
        for (int y = 0; y < h_out; ++y) {
          const int sy = y * stride - pad + ki;
          if (sy < 0 || sy >= h) continue;
          float* out_row = dst + (static_cast<int64_t>(ch) * h + sy) * w;
          const float* in_row = row + static_cast<int64_t>(y) * w_out;
          for (int x = 0; x < w_out; ++x) {
            const int sx = x * stride - pad + kj;
            if (sx >= 0 && sx < w) out_row[sx] += in_row[x];
          }
        }
      }
    }
  }
}

struct ConvDims {
  int n, c, h, w, o, kh, kw, h_out, w_out;
  bool batched;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
                   int pad) {
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (pad < 0) throw std::invalid_argument("conv2d: pad must be >= 0");
  ConvDims d{};
  if (input.rank() == 4) {
    d.batched = true;
    d.n = input.dim(0);
    d.c = input.dim(1);
    d.h = input.dim(2);
    d.w = input.dim(3);
  } else if (input.rank() == 3) {
    d.batched = false;
    d.n = 1;
    d.c = input.dim(0);
    d.h = input.dim(1);
    d.w = input.dim(2);
  } else {
    throw std::invalid_argument("conv2d: input must be [C,H,W] or [N,C,H,W], got " +
                                shape_str(input.shape));
  }
  if (kernel.rank() != 4)
    throw std::invalid_argument("conv2d: kernel must be [O,C,kh,kw], got " +
                                shape_str(kernel.shape));
  d.o = kernel.dim(0);
  d.kh = kernel.dim(2);
  d.kw = kernel.dim(3);
  if (kernel.dim(1) != d.c)
    throw std::invalid_argument("conv2d: input channels " + std::to_string(d.c) +
                                " != kernel channels " + std::to_string(kernel.dim(1)));
  if (bias.numel() != d.o)
    throw std::invalid_argument("conv2d: bias extent " + std::to_string(bias.numel()) +
                                " != output channels " + std::to_string(d.o));
  d.h_out = (d.h + 2 * pad - d.kh) / stride + 1;
  d.w_out = (d.w + 2 * pad - d.kw) / stride + 1;
  if (d.h_out < 1 || d.w_out < 1)
    throw std::invalid_argument("conv2d: kernel " + std::to_string(d.kh) + "x" +
                                std::to_string(d.kw) + " exceeds padded input " +
                                shape_str(input.shape));
  return d;
}

}  // namespace

TensorRef conv2d(const TensorRef& input, const TensorRef& kernel, const TensorRef& bias,
                 int stride, int pad) {
  const ConvDims d = conv_dims(*input, *kernel, *bias, stride, pad);
  const int64_t k_rows = static_cast<int64_t>(d.c) * d.kh * d.kw;
  const int64_t p_cols = static_cast<int64_t>(d.h_out) * d.w_out;
  const int64_t in_plane = static_cast<int64_t>(d.c) * d.h * d.w;
  const int64_t out_plane = static_cast<int64_t>(d.o) * p_cols;

  std::vector<int> out_shape = d.batched ? std::vector<int>{d.n, d.o, d.h_out, d.w_out}
                                         : std::vector<int>{d.o, d.h_out, d.w_out};
  auto out = make_result(std::move(out_shape), {input, kernel, bias});

  std::vector<float> col(static_cast<size_t>(k_rows * p_cols));
  for (int n = 0; n < d.n; ++n) {
    im2col(input->data.data() + n * in_plane, d.c, d.h, d.w, d.kh, d.kw, stride, pad, d.h_out,
           d.w_out, col.data());
    float* dst = out->data.data() + n * out_plane;
    const float* wgt = kernel->data.data();
    const float* b = bias->data.data();
    const float* colp = col.data();
    parallel_for(d.o, [&](int64_t o0, int64_t o1) {
      std::vector<double> acc(static_cast<size_t>(p_cols));
      for (int64_t o = o0; o < o1; ++o) {
        std::fill(acc.begin(), acc.end(), static_cast<double>(b[o]));
        const float* wrow = wgt + o * k_rows;
        for (int64_t k = 0; k < k_rows; ++k) {
          const double wv = wrow[k];
          if (wv == 0.0) continue;
          const float* crow = colp + k * p_cols;
          for (int64_t j = 0; j < p_cols; ++j) acc[j] += wv * crow[j];
        }
        float* orow = dst + o * p_cols;
        for (int64_t j = 0; j < p_cols; ++j) orow[j] = static_cast<float>(acc[j]);
      }
    });
  }

  if (out->requires_grad) {
    auto in = input;
    auto ker = kernel;
    auto bs = bias;
    out->backward_op = [in, ker, bs, d, stride, pad, k_rows, p_cols, in_plane,
                        out_plane](Tensor& self) {
      std::vector<float> col(static_cast<size_t>(k_rows * p_cols));
      std::vector<float> dcol(static_cast<size_t>(k_rows * p_cols));
      if (in->requires_grad) in->ensure_grad();
      if (ker->requires_grad) ker->ensure_grad();
      if (bs->requires_grad) bs->ensure_grad();
      for (int n = 0; n < d.n; ++n) {
        const float* g = self.grad.data() + n * out_plane;
        if (bs->requires_grad) {
          for (int o = 0; o < d.o; ++o) {
            double acc = 0.0;
            const float* grow = g + o * p_cols;
            for (int64_t j = 0; j < p_cols; ++j) acc += grow[j];
            bs->grad[static_cast<size_t>(o)] += static_cast<float>(acc);
          }
        }
        if (ker->requires_grad) {
          im2col(in->data.data() + n * in_plane, d.c, d.h, d.w, d.kh, d.kw, stride, pad, d.h_out,
                 d.w_out, col.data());
          const float* colp = col.data();
          float* dw = ker->grad.data();
          parallel_for(d.o, [&](int64_t o0, int64_t o1) {
            for (int64_t o = o0; o < o1; ++o) {
              const float* grow = g + o * p_cols;
              float* dwrow = dw + o * k_rows;
              for (int64_t k = 0; k < k_rows; ++k) {
                double acc = 0.0;
                const float* crow = colp + k * p_cols;
                for (int64_t j = 0; j < p_cols; ++j) acc += grow[j] * crow[j];
                dwrow[k] += static_cast<float>(acc);
              }
            }
          });
        }
        if (in->requires_grad) {
          const float* wgt = ker->data.data();
          float* dcolp = dcol.data();
          parallel_for(k_rows, [&](int64_t k0, int64_t k1) {
            std::vector<double> acc(static_cast<size_t>(p_cols));
            for (int64_t k = k0; k < k1; ++k) {
              std::fill(acc.begin(), acc.end(), 0.0);
              for (int o = 0; o < d.o; ++o) {
                const double wv = wgt[o * k_rows + k];
                if (wv == 0.0) continue;
                const float* grow = g + static_cast<int64_t>(o) * p_cols;
                for (int64_t j = 0; j < p_cols; ++j) acc[j] += wv * grow[j];
              }
              float* drow = dcolp + k * p_cols;
              for (int64_t j = 0; j < p_cols; ++j) drow[j] = static_cast<float>(acc[j]);
            }
          });
          col2im_add(dcol.data(), d.c, d.h, d.w, d.kh, d.kw, stride, pad, d.h_out, d.w_out,
                     in->grad.data() + n * in_plane);
        }
      }
    };
  }
  return out;
}

TensorRef relu(const TensorRef& x) {
  auto out = make_result(x->shape, {x});
  for (int64_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] > 0.0f ? x->data[i] : 0.0f;
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (in->data[i] > 0.0f) in->grad[i] += self.grad[i];
    };
  }
  return out;
}

TensorRef sigmoid(const TensorRef& x) {
  auto out = make_result(x->shape, {x});
  for (int64_t i = 0; i < x->numel(); ++i)
    out->data[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x->data[i]))));
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        const float y = self.data[i];
        in->grad[i] += self.grad[i] * y * (1.0f - y);
      }
    };
  }
  return out;
}

TensorRef max_pool_2x2(const TensorRef& x) {
  int64_t planes;
  int h, w;
  trailing_hw(*x, planes, h, w);
  const int ho = h / 2, wo = w / 2;
  if (ho < 1 || wo < 1)
    throw std::invalid_argument("max_pool_2x2: spatial dims too small in " + shape_str(x->shape));
  std::vector<int> out_shape = x->shape;
  out_shape[out_shape.size() - 2] = ho;
  out_shape[out_shape.size() - 1] = wo;
  auto out = make_result(std::move(out_shape), {x});

  auto argmax = std::make_shared<std::vector<int64_t>>(out->data.size());
  for (int64_t pl = 0; pl < planes; ++pl) {
    const float* src = x->data.data() + pl * h * w;
    float* dst = out->data.data() + static_cast<int64_t>(pl) * ho * wo;
    int64_t* am = argmax->data() + static_cast<int64_t>(pl) * ho * wo;
    for (int y = 0; y < ho; ++y) {
      for (int xx = 0; xx < wo; ++xx) {
        int64_t best_idx = static_cast<int64_t>(2 * y) * w + 2 * xx;
        float best = src[best_idx];
        const int64_t cands[3] = {best_idx + 1, best_idx + w, best_idx + w + 1};
        for (int64_t ci : cands) {
          if (src[ci] > best) {
            best = src[ci];
            best_idx = ci;
          }
        }
        dst[static_cast<int64_t>(y) * wo + xx] = best;
        am[static_cast<int64_t>(y) * wo + xx] = pl * h * w + best_idx;
      }
    }
  }
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in, argmax](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) in->grad[(*argmax)[i]] += self.grad[i];
    };
  }
  return out;
}

namespace {
struct LerpTap {
  int lo, hi;
  float w_hi;  // weight of hi; lo gets 1 - w_hi
};

std::vector<LerpTap> resize_taps(int in_extent, int out_extent) {
  std::vector<LerpTap> taps(static_cast<size_t>(out_extent));
  const double s = static_cast<double>(in_extent) / out_extent;
  for (int i = 0; i < out_extent; ++i) {
    double src = (i + 0.5) * s - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_extent - 1));
    const int lo = static_cast<int>(src);
    const int hi = std::min(lo + 1, in_extent - 1);
    taps[static_cast<size_t>(i)] = {lo, hi, static_cast<float>(src - lo)};
  }
  return taps;
}
}  // namespace

TensorRef upsample_bilinear(const TensorRef& x, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("upsample_bilinear: target size must be positive");
  int64_t planes;
  int h, w;
  trailing_hw(*x, planes, h, w);
  std::vector<int> out_shape = x->shape;
  out_shape[out_shape.size() - 2] = out_h;
  out_shape[out_shape.size() - 1] = out_w;
  auto out = make_result(std::move(out_shape), {x});

  const auto ty = resize_taps(h, out_h);
  const auto tx = resize_taps(w, out_w);
  for (int64_t pl = 0; pl < planes; ++pl) {
    const float* src = x->data.data() + pl * h * w;
    float* dst = out->data.data() + static_cast<int64_t>(pl) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      const LerpTap& a = ty[static_cast<size_t>(y)];
      for (int xx = 0; xx < out_w; ++xx) {
        const LerpTap& b = tx[static_cast<size_t>(xx)];
        const double top = static_cast<double>(src[a.lo * w + b.lo]) * (1.0 - b.w_hi) +
                           static_cast<double>(src[a.lo * w + b.hi]) * b.w_hi;
        const double bot = static_cast<double>(src[a.hi * w + b.lo]) * (1.0 - b.w_hi) +
                           static_cast<double>(src[a.hi * w + b.hi]) * b.w_hi;
        dst[static_cast<int64_t>(y) * out_w + xx] =
            static_cast<float>(top * (1.0 - a.w_hi) + bot * a.w_hi);
      }
    }
  }
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in, ty, tx, planes, h, w, out_h, out_w](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (int64_t pl = 0; pl < planes; ++pl) {
        float* dg = in->grad.data() + pl * h * w;
        const float* g = self.grad.data() + static_cast<int64_t>(pl) * out_h * out_w;
        for (int y = 0; y < out_h; ++y) {
          const LerpTap& a = ty[static_cast<size_t>(y)];
          for (int xx = 0; xx < out_w; ++xx) {
            const LerpTap& b = tx[static_cast<size_t>(xx)];
            const float gv = g[static_cast<int64_t>(y) * out_w + xx];
            dg[a.lo * w + b.lo] += gv * (1.0f - a.w_hi) * (1.0f - b.w_hi);
            dg[a.lo * w + b.hi] += gv * (1.0f - a.w_hi) * b.w_hi;
            dg[a.hi * w + b.lo] += gv * a.w_hi * (1.0f - b.w_hi);
            dg[a.hi * w + b.hi] += gv * a.w_hi * b.w_hi;
          }
        }
      }
    };
  }
  return out;
}

TensorRef fully_connected(const TensorRef& x, const TensorRef& weight, const TensorRef& bias) {
  if (x->rank() != 1)
    throw std::invalid_argument("fully_connected: input must be flat, got " + shape_str(x->shape));
  if (weight->rank() != 2 || weight->dim(1) != x->dim(0))
    throw std::invalid_argument("fully_connected: weight " + shape_str(weight->shape) +
                                " incompatible with input " + shape_str(x->shape));
  const int n_out = weight->dim(0);
  const int n_in = weight->dim(1);
  if (bias->numel() != n_out)
    throw std::invalid_argument("fully_connected: bias extent " + std::to_string(bias->numel()) +
                                " != output extent " + std::to_string(n_out));
  auto out = make_result({n_out}, {x, weight, bias});
  parallel_for(n_out, [&](int64_t o0, int64_t o1) {
    for (int64_t o = o0; o < o1; ++o) {
      double acc = bias->data[static_cast<size_t>(o)];
      const float* wrow = weight->data.data() + o * n_in;
      for (int i = 0; i < n_in; ++i) acc += static_cast<double>(wrow[i]) * x->data[static_cast<size_t>(i)];
      out->data[static_cast<size_t>(o)] = static_cast<float>(acc);
    }
  });
  if (out->requires_grad) {
    auto in = x;
    auto wgt = weight;
    auto bs = bias;
    out->backward_op = [in, wgt, bs, n_out, n_in](Tensor& self) {
      if (bs->requires_grad) {
        bs->ensure_grad();
        for (int o = 0; o < n_out; ++o) bs->grad[static_cast<size_t>(o)] += self.grad[static_cast<size_t>(o)];
      }
      if (wgt->requires_grad) {
        wgt->ensure_grad();
        for (int o = 0; o < n_out; ++o) {
          const float g = self.grad[static_cast<size_t>(o)];
          if (g == 0.0f) continue;
          float* dwrow = wgt->grad.data() + static_cast<int64_t>(o) * n_in;
          for (int i = 0; i < n_in; ++i) dwrow[i] += g * in->data[static_cast<size_t>(i)];
        }
      }
      if (in->requires_grad) {
        in->ensure_grad();
        for (int i = 0; i < n_in; ++i) {
          double acc = 0.0;
          for (int o = 0; o < n_out; ++o)
            acc += static_cast<double>(wgt->data[static_cast<int64_t>(o) * n_in + i]) *
                   self.grad[static_cast<size_t>(o)];
          in->grad[static_cast<size_t>(i)] += static_cast<float>(acc);
        }
      }
    };
  }
  return out;
}

TensorRef add(const TensorRef& a, const TensorRef& b) {
  if (a->shape != b->shape)
    throw std::invalid_argument("add: shape " + shape_str(a->shape) + " != " +
                                shape_str(b->shape));
  auto out = make_result(a->shape, {a, b});
  for (int64_t i = 0; i < a->numel(); ++i) out->data[i] = a->data[i] + b->data[i];
  if (out->requires_grad) {
    auto pa = a;
    auto pb = b;
    out->backward_op = [pa, pb](Tensor& self) {
      if (pa->requires_grad) accumulate(*pa, self.grad);
      if (pb->requires_grad) accumulate(*pb, self.grad);
    };
  }
  return out;
}

TensorRef scale(const TensorRef& x, float s) {
  auto out = make_result(x->shape, {x});
  for (int64_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] * s;
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in, s](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i] * s;
    };
  }
  return out;
}

TensorRef mul_gate(const TensorRef& x, std::vector<float> gate) {
  if (static_cast<int64_t>(gate.size()) != x->numel())
    throw std::invalid_argument("mul_gate: gate size " + std::to_string(gate.size()) +
                                " != tensor numel " + std::to_string(x->numel()));
  auto g = std::make_shared<std::vector<float>>(std::move(gate));
  auto out = make_result(x->shape, {x});
  for (int64_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] * (*g)[i];
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in, g](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i] * (*g)[i];
    };
  }
  return out;
}

TensorRef scale_by_param(const TensorRef& x, const TensorRef& s) {
  if (s->numel() != 1) throw std::invalid_argument("scale_by_param: scalar expected");
  auto out = make_result(x->shape, {x, s});
  const float sv = s->data[0];
  for (int64_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] * sv;
  if (out->requires_grad) {
    auto in = x;
    auto sc = s;
    out->backward_op = [in, sc](Tensor& self) {
      if (in->requires_grad) {
        in->ensure_grad();
        const float sv = sc->data[0];
        for (size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i] * sv;
      }
      if (sc->requires_grad) {
        sc->ensure_grad();
        double acc = 0.0;
        for (size_t i = 0; i < self.grad.size(); ++i)
          acc += static_cast<double>(self.grad[i]) * in->data[i];
        sc->grad[0] += static_cast<float>(acc);
      }
    };
  }
  return out;
}

TensorRef add_scalar_param(const TensorRef& x, const TensorRef& b) {
  if (b->numel() != 1) throw std::invalid_argument("add_scalar_param: scalar expected");
  auto out = make_result(x->shape, {x, b});
  const float bv = b->data[0];
  for (int64_t i = 0; i < x->numel(); ++i) out->data[i] = x->data[i] + bv;
  if (out->requires_grad) {
    auto in = x;
    auto bs = b;
    out->backward_op = [in, bs](Tensor& self) {
      if (in->requires_grad) accumulate(*in, self.grad);
      if (bs->requires_grad) {
        bs->ensure_grad();
        double acc = 0.0;
        for (float g : self.grad) acc += g;
        bs->grad[0] += static_cast<float>(acc);
      }
    };
  }
  return out;
}

TensorRef flatten(const TensorRef& x) {
  auto out = make_result({static_cast<int>(x->numel())}, {x});
  out->data = x->data;
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in](Tensor& self) {
      if (in->requires_grad) accumulate(*in, self.grad);
    };
  }
  return out;
}

TensorRef reshape(const TensorRef& x, std::vector<int> shape) {
  if (shape_numel(shape) != x->numel())
    throw std::invalid_argument("reshape: " + shape_str(x->shape) + " has " +
                                std::to_string(x->numel()) + " elements, target " +
                                shape_str(shape) + " needs " + std::to_string(shape_numel(shape)));
  auto out = make_result(std::move(shape), {x});
  out->data = x->data;
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in](Tensor& self) {
      if (in->requires_grad) accumulate(*in, self.grad);
    };
  }
  return out;
}

TensorRef concat_channels(const std::vector<TensorRef>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const int rank = parts[0]->rank();
  if (rank != 3 && rank != 4)
    throw std::invalid_argument("concat_channels: inputs must be [C,H,W] or [N,C,H,W]");
  const int cdim = rank - 3;
  int total_c = 0;
  for (const auto& p : parts) {
    if (p->rank() != rank)
      throw std::invalid_argument("concat_channels: mixed ranks");
    for (int i = 0; i < rank; ++i) {
      if (i == cdim) continue;
      if (p->dim(i) != parts[0]->dim(i))
        throw std::invalid_argument("concat_channels: dim " + std::to_string(i) + " mismatch: " +
                                    shape_str(p->shape) + " vs " + shape_str(parts[0]->shape));
    }
    total_c += p->dim(cdim);
  }
  std::vector<int> out_shape = parts[0]->shape;
  out_shape[static_cast<size_t>(cdim)] = total_c;
  auto out = make_result(std::move(out_shape), parts);

  const int n = rank == 4 ? parts[0]->dim(0) : 1;
  const int64_t hw = static_cast<int64_t>(parts[0]->dim(rank - 2)) * parts[0]->dim(rank - 1);
  std::vector<int64_t> offsets(parts.size());
  {
    int64_t off = 0;
    for (size_t i = 0; i < parts.size(); ++i) {
      offsets[i] = off;
      off += parts[i]->dim(cdim) * hw;
    }
  }
  const int64_t out_batch = static_cast<int64_t>(total_c) * hw;
  for (int b = 0; b < n; ++b) {
    for (size_t i = 0; i < parts.size(); ++i) {
      const int64_t len = parts[i]->dim(cdim) * hw;
      std::memcpy(out->data.data() + b * out_batch + offsets[i],
                  parts[i]->data.data() + b * len, static_cast<size_t>(len) * sizeof(float));
    }
  }
  if (out->requires_grad) {
    auto ps = parts;
    out->backward_op = [ps, offsets, n, hw, out_batch, cdim](Tensor& self) {
      for (size_t i = 0; i < ps.size(); ++i) {
        if (!ps[i]->requires_grad) continue;
        ps[i]->ensure_grad();
        const int64_t len = ps[i]->dim(cdim) * hw;
        for (int b = 0; b < n; ++b) {
          const float* g = self.grad.data() + b * out_batch + offsets[i];
          float* dst = ps[i]->grad.data() + b * len;
          for (int64_t j = 0; j < len; ++j) dst[j] += g[j];
        }
      }
    };
  }
  return out;
}

TensorRef crop2d(const TensorRef& x, int out_h, int out_w) {
  int64_t planes;
  int h, w;
  trailing_hw(*x, planes, h, w);
  if (out_h < 1 || out_h > h || out_w < 1 || out_w > w)
    throw std::invalid_argument("crop2d: window " + std::to_string(out_h) + "x" +
                                std::to_string(out_w) + " outside " + shape_str(x->shape));
  std::vector<int> out_shape = x->shape;
  out_shape[out_shape.size() - 2] = out_h;
  out_shape[out_shape.size() - 1] = out_w;
  auto out = make_result(std::move(out_shape), {x});
  for (int64_t pl = 0; pl < planes; ++pl)
    for (int y = 0; y < out_h; ++y)
      std::memcpy(out->data.data() + (pl * out_h + y) * out_w,
                  x->data.data() + (pl * h + y) * w, static_cast<size_t>(out_w) * sizeof(float));
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in, planes, h, w, out_h, out_w](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (int64_t pl = 0; pl < planes; ++pl)
        for (int y = 0; y < out_h; ++y) {
          const float* g = self.grad.data() + (pl * out_h + y) * out_w;
          float* dst = in->grad.data() + (pl * h + y) * w;
          for (int x2 = 0; x2 < out_w; ++x2) dst[x2] += g[x2];
        }
    };
  }
  return out;
}

TensorRef pad2d(const TensorRef& x, int out_h, int out_w) {
  int64_t planes;
  int h, w;
  trailing_hw(*x, planes, h, w);
  if (out_h < h || out_w < w)
    throw std::invalid_argument("pad2d: target " + std::to_string(out_h) + "x" +
                                std::to_string(out_w) + " smaller than " + shape_str(x->shape));
  std::vector<int> out_shape = x->shape;
  out_shape[out_shape.size() - 2] = out_h;
  out_shape[out_shape.size() - 1] = out_w;
  auto out = make_result(std::move(out_shape), {x});
  for (int64_t pl = 0; pl < planes; ++pl)
    for (int y = 0; y < h; ++y)
      std::memcpy(out->data.data() + (pl * out_h + y) * out_w,
                  x->data.data() + (pl * h + y) * w, static_cast<size_t>(w) * sizeof(float));
  if (out->requires_grad) {
    auto in = x;
    out->backward_op = [in, planes, h, w, out_h, out_w](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (int64_t pl = 0; pl < planes; ++pl)
        for (int y = 0; y < h; ++y) {
          const float* g = self.grad.data() + (pl * out_h + y) * out_w;
          float* dst = in->grad.data() + (pl * h + y) * w;
          for (int x2 = 0; x2 < w; ++x2) dst[x2] += g[x2];
        }
    };
  }
  return out;
}

TensorRef roi_pool(const TensorRef& feature, float x_min, float y_min, float x_max, float y_max,
                   int grid, int total_stride) {
  if (feature->rank() != 3)
    throw std::invalid_argument("roi_pool: feature must be [C,h,w], got " +
                                shape_str(feature->shape));
  if (grid < 1) throw std::invalid_argument("roi_pool: grid must be >= 1");
  if (total_stride < 1) throw std::invalid_argument("roi_pool: stride must be >= 1");
  const int c = feature->dim(0), h = feature->dim(1), w = feature->dim(2);

  // Project to feature coordinates; degenerate boxes expand to one cell.
  int fx0 = static_cast<int>(std::floor(x_min / total_stride));
  int fy0 = static_cast<int>(std::floor(y_min / total_stride));
  int fx1 = static_cast<int>(std::ceil(x_max / total_stride));
  int fy1 = static_cast<int>(std::ceil(y_max / total_stride));
  fx0 = std::clamp(fx0, 0, w - 1);
  fy0 = std::clamp(fy0, 0, h - 1);
  fx1 = std::clamp(fx1, fx0 + 1, w);
  fy1 = std::clamp(fy1, fy0 + 1, h);
  const int rw = fx1 - fx0, rh = fy1 - fy0;

  auto out = make_result({c, grid, grid}, {feature});
  auto argmax = std::make_shared<std::vector<int64_t>>(out->data.size());
  for (int ch = 0; ch < c; ++ch) {
    const float* src = feature->data.data() + static_cast<int64_t>(ch) * h * w;
    for (int gy = 0; gy < grid; ++gy) {
      int ys = fy0 + static_cast<int>(std::floor(static_cast<double>(gy) * rh / grid));
      int ye = fy0 + static_cast<int>(std::ceil(static_cast<double>(gy + 1) * rh / grid));
      ye = std::max(ye, ys + 1);
      ye = std::min(ye, fy1);
      ys = std::min(ys, ye - 1);
      for (int gx = 0; gx < grid; ++gx) {
        int xs = fx0 + static_cast<int>(std::floor(static_cast<double>(gx) * rw / grid));
        int xe = fx0 + static_cast<int>(std::ceil(static_cast<double>(gx + 1) * rw / grid));
        xe = std::max(xe, xs + 1);
        xe = std::min(xe, fx1);
        xs = std::min(xs, xe - 1);
        float best = src[static_cast<int64_t>(ys) * w + xs];
        int64_t best_idx = static_cast<int64_t>(ys) * w + xs;
        for (int y = ys; y < ye; ++y)
          for (int x = xs; x < xe; ++x) {
            const int64_t idx = static_cast<int64_t>(y) * w + x;
            if (src[idx] > best) {
              best = src[idx];
              best_idx = idx;
            }
          }
        const int64_t oi = (static_cast<int64_t>(ch) * grid + gy) * grid + gx;
        out->data[oi] = best;
        (*argmax)[oi] = static_cast<int64_t>(ch) * h * w + best_idx;
      }
    }
  }
  if (out->requires_grad) {
    auto in = feature;
    out->backward_op = [in, argmax](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) in->grad[(*argmax)[i]] += self.grad[i];
    };
  }
  return out;
}

TensorRef warp_by_flow(const TensorRef& map, const std::vector<float>& flow_dx,
                       const std::vector<float>& flow_dy) {
  if (map->rank() != 2)
    throw std::invalid_argument("warp_by_flow: map must be [H,W], got " + shape_str(map->shape));
  const int h = map->dim(0), w = map->dim(1);
  if (static_cast<int64_t>(flow_dx.size()) != map->numel() ||
      static_cast<int64_t>(flow_dy.size()) != map->numel())
    throw std::invalid_argument("warp_by_flow: flow dims do not match map " +
                                shape_str(map->shape));
  auto dx = std::make_shared<std::vector<float>>(flow_dx);
  auto dy = std::make_shared<std::vector<float>>(flow_dy);
  auto out = make_result(map->shape, {map});

  auto sample_taps = [h, w](double sx, double sy, int64_t (&idx)[4], double (&wt)[4]) {
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const double fx = sx - x0, fy = sy - y0;
    const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
    const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int k = 0; k < 4; ++k) {
      if (xs[k] < 0 || xs[k] >= w || ys[k] < 0 || ys[k] >= h) {
        idx[k] = -1;
        wt[k] = 0.0;
      } else {
        idx[k] = static_cast<int64_t>(ys[k]) * w + xs[k];
        wt[k] = ws[k];
      }
    }
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int64_t p = static_cast<int64_t>(y) * w + x;
      int64_t idx[4];
      double wt[4];
      sample_taps(x + static_cast<double>((*dx)[p]), y + static_cast<double>((*dy)[p]), idx, wt);
      double acc = 0.0;
      for (int k = 0; k < 4; ++k)
        if (idx[k] >= 0) acc += wt[k] * map->data[idx[k]];
      out->data[p] = static_cast<float>(acc);
    }
  }
  if (out->requires_grad) {
    auto in = map;
    out->backward_op = [in, dx, dy, h, w, sample_taps](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int64_t p = static_cast<int64_t>(y) * w + x;
          const float g = self.grad[p];
          if (g == 0.0f) continue;
          int64_t idx[4];
          double wt[4];
          sample_taps(x + static_cast<double>((*dx)[p]), y + static_cast<double>((*dy)[p]), idx,
                      wt);
          for (int k = 0; k < 4; ++k)
            if (idx[k] >= 0) in->grad[idx[k]] += static_cast<float>(wt[k] * g);
        }
      }
    };
  }
  return out;
}

TensorRef weighted_bce(const TensorRef& pred, const std::vector<uint8_t>& target) {
  if (static_cast<int64_t>(target.size()) != pred->numel())
    throw std::invalid_argument("weighted_bce: target size " + std::to_string(target.size()) +
                                " != prediction numel " + std::to_string(pred->numel()));
  const int64_t n = pred->numel();
  int64_t fg = 0;
  for (uint8_t t : target) fg += t ? 1 : 0;
  const double w_fg = static_cast<double>(n - fg) / n;
  const double w_bg = static_cast<double>(fg) / n;

  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double p = std::clamp(static_cast<double>(pred->data[i]), kBceEps, 1.0 - kBceEps);
    loss -= target[static_cast<size_t>(i)] ? w_fg * std::log(p) : w_bg * std::log(1.0 - p);
  }
  loss /= static_cast<double>(n);

  auto out = make_result({1}, {pred});
  out->data[0] = static_cast<float>(loss);
  if (out->requires_grad) {
    auto in = pred;
    auto tgt = std::make_shared<std::vector<uint8_t>>(target);
    out->backward_op = [in, tgt, n, w_fg, w_bg](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      const double g = self.grad[0];
      for (int64_t i = 0; i < n; ++i) {
        const double p = static_cast<double>(in->data[i]);
        if (p <= kBceEps || p >= 1.0 - kBceEps) continue;  // clamp region, flat
        const double d = (*tgt)[static_cast<size_t>(i)] ? -w_fg / p : w_bg / (1.0 - p);
        in->grad[i] += static_cast<float>(g * d / static_cast<double>(n));
      }
    };
  }
  return out;
}

TensorRef smooth_l1(const TensorRef& pred, const std::vector<float>& target) {
  if (static_cast<int64_t>(target.size()) != pred->numel())
    throw std::invalid_argument("smooth_l1: target size " + std::to_string(target.size()) +
                                " != prediction numel " + std::to_string(pred->numel()));
  double loss = 0.0;
  for (int64_t i = 0; i < pred->numel(); ++i) {
    const double d = static_cast<double>(pred->data[i]) - target[static_cast<size_t>(i)];
    if (!std::isfinite(d)) throw std::invalid_argument("smooth_l1: non-finite input");
    loss += std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
  }
  auto out = make_result({1}, {pred});
  out->data[0] = static_cast<float>(loss);
  if (out->requires_grad) {
    auto in = pred;
    auto tgt = std::make_shared<std::vector<float>>(target);
    out->backward_op = [in, tgt](Tensor& self) {
      if (!in->requires_grad) return;
      in->ensure_grad();
      const float g = self.grad[0];
      for (int64_t i = 0; i < in->numel(); ++i) {
        const float d = in->data[i] - (*tgt)[static_cast<size_t>(i)];
        in->grad[i] += g * std::clamp(d, -1.0f, 1.0f);
      }
    };
  }
  return out;
}

}  // namespace rvos::ad
