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
// Test-only f64 reference implementations, independent of the production
// kernels, plus the central finite-difference harness built on them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec to_f64(const std::vector<float>& v) { return Vec(v.begin(), v.end()); }
inline std::vector<float> to_f32(const Vec& v) { return {v.begin(), v.end()}; }

// plain quadruple-loop convolution, NCHW/OIHW
inline Vec conv2d_ref(const Vec& in, int n, int c, int h, int w, const Vec& k, int o, int kh,
                      int kw, const Vec& bias, int stride, int pad) {
  const int ho = (h + 2 * pad - kh) / stride + 1;
  const int wo = (w + 2 * pad - kw) / stride + 1;
  Vec out(static_cast<size_t>(n) * o * ho * wo, 0.0);
  for (int ni = 0; ni < n; ++ni)
    for (int oi = 0; oi < o; ++oi)
      for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
          double acc = bias[static_cast<size_t>(oi)];
          for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int sy = y * stride - pad + ky;
                const int sx = x * stride - pad + kx;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                acc += in[((static_cast<size_t>(ni) * c + ci) * h + sy) * w + sx] *
                       k[((static_cast<size_t>(oi) * c + ci) * kh + ky) * kw + kx];
              }
          out[((static_cast<size_t>(ni) * o + oi) * ho + y) * wo + x] = acc;
        }
  return out;
}

inline Vec relu_ref(const Vec& v) {
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? v[i] : 0.0;
  return out;
}

inline Vec sigmoid_ref(const Vec& v) {
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
  return out;
}

inline Vec pool2_ref(const Vec& in, int planes, int h, int w) {
  const int ho = h / 2, wo = w / 2;
  Vec out(static_cast<size_t>(planes) * ho * wo);
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        double m = in[(static_cast<size_t>(p) * h + 2 * y) * w + 2 * x];
        m = std::max(m, in[(static_cast<size_t>(p) * h + 2 * y) * w + 2 * x + 1]);
        m = std::max(m, in[(static_cast<size_t>(p) * h + 2 * y + 1) * w + 2 * x]);
        m = std::max(m, in[(static_cast<size_t>(p) * h + 2 * y + 1) * w + 2 * x + 1]);
        out[(static_cast<size_t>(p) * ho + y) * wo + x] = m;
      }
  return out;
}

// half-pixel centers, edge clamped; mirrors the documented contract
inline Vec upsample_ref(const Vec& in, int planes, int h, int w, int oh, int ow) {
  Vec out(static_cast<size_t>(planes) * oh * ow);
  for (int p = 0; p < planes; ++p)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        double sy = (y + 0.5) * h / oh - 0.5;
        double sx = (x + 0.5) * w / ow - 0.5;
        sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
        sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
        const int y0 = static_cast<int>(sy), x0 = static_cast<int>(sx);
        const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
        const double fy = sy - y0, fx = sx - x0;
        const double top = in[(static_cast<size_t>(p) * h + y0) * w + x0] * (1 - fx) +
                           in[(static_cast<size_t>(p) * h + y0) * w + x1] * fx;
        const double bot = in[(static_cast<size_t>(p) * h + y1) * w + x0] * (1 - fx) +
                           in[(static_cast<size_t>(p) * h + y1) * w + x1] * fx;
        out[(static_cast<size_t>(p) * oh + y) * ow + x] = top * (1 - fy) + bot * fy;
      }
  return out;
}

inline Vec fc_ref(const Vec& x, const Vec& wgt, const Vec& b, int n_out, int n_in) {
  Vec out(static_cast<size_t>(n_out));
  for (int o = 0; o < n_out; ++o) {
    double acc = b[static_cast<size_t>(o)];
    for (int i = 0; i < n_in; ++i) acc += wgt[static_cast<size_t>(o) * n_in + i] * x[static_cast<size_t>(i)];
    out[static_cast<size_t>(o)] = acc;
  }
  return out;
}

inline double wbce_ref(const Vec& pred, const std::vector<uint8_t>& target) {
  const double n = static_cast<double>(pred.size());
  double fg = 0;
  for (uint8_t t : target) fg += t ? 1 : 0;
  const double w_fg = (n - fg) / n, w_bg = fg / n;
  double loss = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], 1e-7, 1.0 - 1e-7);
    loss -= target[i] ? w_fg * std::log(p) : w_bg * std::log(1.0 - p);
  }
  return loss / n;
}

inline double smooth_l1_ref(const Vec& pred, const Vec& target) {
  double loss = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    loss += std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
  }
  return loss;
}

// same projection/partition contract as the production op
inline Vec roi_pool_ref(const Vec& feat, int c, int h, int w, double x_min, double y_min,
                        double x_max, double y_max, int grid, int stride) {
  int fx0 = static_cast<int>(std::floor(x_min / stride));
  int fy0 = static_cast<int>(std::floor(y_min / stride));
  int fx1 = static_cast<int>(std::ceil(x_max / stride));
  int fy1 = static_cast<int>(std::ceil(y_max / stride));
  fx0 = std::clamp(fx0, 0, w - 1);
  fy0 = std::clamp(fy0, 0, h - 1);
  fx1 = std::clamp(fx1, fx0 + 1, w);
  fy1 = std::clamp(fy1, fy0 + 1, h);
  const int rw = fx1 - fx0, rh = fy1 - fy0;
  Vec out(static_cast<size_t>(c) * grid * grid, 0.0);
  for (int ch = 0; ch < c; ++ch)
    for (int gy = 0; gy < grid; ++gy)
      for (int gx = 0; gx < grid; ++gx) {
        int ys = fy0 + static_cast<int>(std::floor(static_cast<double>(gy) * rh / grid));
        int ye = fy0 + static_cast<int>(std::ceil(static_cast<double>(gy + 1) * rh / grid));
        ye = std::min(std::max(ye, ys + 1), fy1);
        ys = std::min(ys, ye - 1);
        int xs = fx0 + static_cast<int>(std::floor(static_cast<double>(gx) * rw / grid));
        int xe = fx0 + static_cast<int>(std::ceil(static_cast<double>(gx + 1) * rw / grid));
        xe = std::min(std::max(xe, xs + 1), fx1);
        xs = std::min(xs, xe - 1);
        double m = -1e300;
        for (int y = ys; y < ye; ++y)
          for (int x = xs; x < xe; ++x)
            m = std::max(m, feat[(static_cast<size_t>(ch) * h + y) * w + x]);
        out[(static_cast<size_t>(ch) * grid + gy) * grid + gx] = m;
      }
  return out;
}

// out(p) = bilinear(map, p + flow(p)), zero outside
inline Vec warp_ref(const Vec& map, int h, int w, const Vec& dx, const Vec& dy) {
  Vec out(map.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const size_t p = static_cast<size_t>(y) * w + x;
      const double sx = x + dx[p], sy = y + dy[p];
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
      const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
      double acc = 0;
      for (int k = 0; k < 4; ++k)
        if (xs[k] >= 0 && xs[k] < w && ys[k] >= 0 && ys[k] < h)
          acc += ws[k] * map[static_cast<size_t>(ys[k]) * w + xs[k]];
      out[p] = acc;
    }
  return out;
}

// ---- finite differences -----------------------------------------------------

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-3) {
  Vec g(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

/// Per-component relative error with a small-magnitude guard.
inline double max_rel_err(const std::vector<float>& analytic, const Vec& fd) {
  double worst = 0;
  for (size_t i = 0; i < fd.size(); ++i) {
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(fd[i]), 1e-4});
    worst = std::max(worst, std::abs(a - fd[i]) / denom);
  }
  return worst;
}

inline double norm_rel_err(const std::vector<float>& analytic, const Vec& fd) {
  double num = 0, den = 0;
  for (size_t i = 0; i < fd.size(); ++i) {
    num += (analytic[i] - fd[i]) * (analytic[i] - fd[i]);
    den += fd[i] * fd[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

/// Random weights for scalarizing a vector output: loss = sum r_i * out_i.
/// Keeps gradient magnitudes O(1) so the relative check is meaningful.
/// Values are f32-representable: the implementation under test stores its
/// upstream gradient in f32, and the reference must weight identically.
template <typename RngT>
Vec random_probe(size_t n, RngT& rng) {
  Vec r(n);
  for (auto& v : r) v = static_cast<double>(0.5f + rng.uniform());
  return r;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace oracle
