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

#include "rvos/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rvos/synth.hpp"

namespace rvos::flow {

using img::FlowField;
using img::Frame;
using img::GrayMap;

namespace {

constexpr float kFloMagic = 202021.25f;

GrayMap to_grayscale(const Frame& f) {
  GrayMap g(f.width, f.height);
  const int64_t plane = static_cast<int64_t>(f.width) * f.height;
  for (int64_t i = 0; i < plane; ++i)
    g.v[static_cast<size_t>(i)] = 0.299f * f.rgb[static_cast<size_t>(i)] +
                                  0.587f * f.rgb[static_cast<size_t>(plane + i)] +
                                  0.114f * f.rgb[static_cast<size_t>(2 * plane + i)];
  return g;
}

float at_clamped(const GrayMap& m, int x, int y) {
  x = std::clamp(x, 0, m.width - 1);
  y = std::clamp(y, 0, m.height - 1);
  return m.at(y, x);
}

// Bilinear with clamp-to-edge; keeps border constraints sane when warping.
float sample_clamped(const GrayMap& m, double sx, double sy) {
  sx = std::clamp(sx, 0.0, static_cast<double>(m.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(m.height - 1));
  const int x0 = static_cast<int>(sx);
  const int y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, m.width - 1);
  const int y1 = std::min(y0 + 1, m.height - 1);
  const double fx = sx - x0, fy = sy - y0;
  const double top = m.at(y0, x0) * (1 - fx) + m.at(y0, x1) * fx;
  const double bot = m.at(y1, x0) * (1 - fx) + m.at(y1, x1) * fx;
  return static_cast<float>(top * (1 - fy) + bot * fy);
}

// 5-tap binomial blur then 2x subsample.
GrayMap downsample(const GrayMap& src) {
  static const float k[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
  GrayMap tmp(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * at_clamped(src, x + i, y);
      tmp.at(y, x) = static_cast<float>(acc);
    }
  GrayMap blur(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * at_clamped(tmp, x, y + i);
      blur.at(y, x) = static_cast<float>(acc);
    }
  GrayMap out((src.width + 1) / 2, (src.height + 1) / 2);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) out.at(y, x) = blur.at(2 * y, 2 * x);
  return out;
}

GrayMap resize_map(const GrayMap& src, int w, int h) {
  GrayMap out(w, h);
  const double sx = static_cast<double>(src.width) / w;
  const double sy = static_cast<double>(src.height) / h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(y, x) = sample_clamped(src, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
  return out;
}

// One linearization: solve for the flow increment on top of (u, v).
void horn_schunck_sweeps(const GrayMap& a, const GrayMap& b, GrayMap& u, GrayMap& v, float alpha,
                         int iterations) {
  const int w = a.width, h = a.height;
  GrayMap bw(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      bw.at(y, x) = sample_clamped(b, x + static_cast<double>(u.at(y, x)),
                                   y + static_cast<double>(v.at(y, x)));

  GrayMap ix(w, h), iy(w, h), it(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      ix.at(y, x) = 0.25f * (at_clamped(a, x + 1, y) - at_clamped(a, x - 1, y) +
                             at_clamped(bw, x + 1, y) - at_clamped(bw, x - 1, y));
      iy.at(y, x) = 0.25f * (at_clamped(a, x, y + 1) - at_clamped(a, x, y - 1) +
                             at_clamped(bw, x, y + 1) - at_clamped(bw, x, y - 1));
      it.at(y, x) = bw.at(y, x) - a.at(y, x);
    }

  GrayMap du(w, h), dv(w, h), du2(w, h), dv2(w, h);
  const double a2 = static_cast<double>(alpha) * alpha;
  for (int iter = 0; iter < iterations; ++iter) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double ubar = 0.25 * (at_clamped(du, x - 1, y) + at_clamped(du, x + 1, y) +
                                    at_clamped(du, x, y - 1) + at_clamped(du, x, y + 1));
        const double vbar = 0.25 * (at_clamped(dv, x - 1, y) + at_clamped(dv, x + 1, y) +
                                    at_clamped(dv, x, y - 1) + at_clamped(dv, x, y + 1));
        const double gx = ix.at(y, x), gy = iy.at(y, x), gt = it.at(y, x);
        const double t = (gx * ubar + gy * vbar + gt) / (a2 + gx * gx + gy * gy);
        du2.at(y, x) = static_cast<float>(ubar - gx * t);
        dv2.at(y, x) = static_cast<float>(vbar - gy * t);
      }
    std::swap(du, du2);
    std::swap(dv, dv2);
  }
  for (size_t i = 0; i < u.v.size(); ++i) {
    u.v[i] += du.v[i];
    v.v[i] += dv.v[i];
  }
}

}  // namespace

FlowField estimate_flow(const Frame& a, const Frame& b, const FlowParams& params) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("estimate_flow: frame dims differ: " + std::to_string(a.width) +
                                "x" + std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                "x" + std::to_string(b.height));
  if (params.alpha <= 0.0f || params.iterations < 1 || params.levels < 1)
    throw std::invalid_argument("estimate_flow: invalid params");

  std::vector<GrayMap> pyr_a{to_grayscale(a)};
  std::vector<GrayMap> pyr_b{to_grayscale(b)};
  for (int l = 1; l < params.levels; ++l) {
    const GrayMap& top = pyr_a.back();
    if (std::min(top.width, top.height) < 16) break;
    pyr_a.push_back(downsample(pyr_a.back()));
    pyr_b.push_back(downsample(pyr_b.back()));
  }

  const GrayMap& coarsest = pyr_a.back();
  GrayMap u(coarsest.width, coarsest.height), v(coarsest.width, coarsest.height);
  for (int l = static_cast<int>(pyr_a.size()) - 1; l >= 0; --l) {
    if (u.width != pyr_a[static_cast<size_t>(l)].width ||
        u.height != pyr_a[static_cast<size_t>(l)].height) {
      const double sx = static_cast<double>(pyr_a[static_cast<size_t>(l)].width) / u.width;
      const double sy = static_cast<double>(pyr_a[static_cast<size_t>(l)].height) / u.height;
      u = resize_map(u, pyr_a[static_cast<size_t>(l)].width, pyr_a[static_cast<size_t>(l)].height);
      v = resize_map(v, pyr_a[static_cast<size_t>(l)].width, pyr_a[static_cast<size_t>(l)].height);
      for (auto& x : u.v) x = static_cast<float>(x * sx);
      for (auto& x : v.v) x = static_cast<float>(x * sy);
    }
    for (int wrp = 0; wrp < std::max(1, params.warps); ++wrp)
      horn_schunck_sweeps(pyr_a[static_cast<size_t>(l)], pyr_b[static_cast<size_t>(l)], u, v,
                          params.alpha, params.iterations);
  }

  FlowField out(a.width, a.height);
  out.dx = std::move(u.v);
  out.dy = std::move(v.v);
  return out;
}

namespace {
void put_u32le(std::ofstream& f, uint32_t bits) {
  const char b[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                     static_cast<char>((bits >> 16) & 0xff),
                     static_cast<char>((bits >> 24) & 0xff)};
  f.write(b, 4);
}

void put_f32le(std::ofstream& f, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(f, bits);
}

void put_i32le(std::ofstream& f, int32_t v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32le(f, bits);
}

float get_f32le(const uint8_t* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

int32_t get_i32le(const uint8_t* p) {
  const uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                        (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  int32_t v;
  std::memcpy(&v, &bits, 4);
  return v;
}
}  // namespace

void write_flo(const FlowField& field, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open .flo for writing: " + path);
  put_f32le(f, kFloMagic);
  put_i32le(f, field.width);
  put_i32le(f, field.height);
  for (int64_t i = 0; i < static_cast<int64_t>(field.dx.size()); ++i) {
    put_f32le(f, field.dx[static_cast<size_t>(i)]);
    put_f32le(f, field.dy[static_cast<size_t>(i)]);
  }
  if (!f) throw std::runtime_error("short write on .flo: " + path);
}

FlowField read_flo(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open .flo: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12)
    throw std::runtime_error(".flo truncated at byte offset " + std::to_string(bytes.size()) +
                             ": " + path);
  const float magic = get_f32le(bytes.data());
  if (magic != kFloMagic)
    throw std::runtime_error(".flo bad magic (expected 202021.25) at byte offset 0: " + path);
  const int32_t w = get_i32le(bytes.data() + 4);
  const int32_t h = get_i32le(bytes.data() + 8);
  if (w <= 0 || h <= 0)
    throw std::runtime_error(".flo bad dimensions at byte offset 4: " + path);
  const size_t need = 12 + static_cast<size_t>(w) * h * 8;
  if (bytes.size() < need)
    throw std::runtime_error(".flo truncated at byte offset " + std::to_string(bytes.size()) +
                             " (need " + std::to_string(need) + "): " + path);
  FlowField out(w, h);
  for (int64_t i = 0; i < static_cast<int64_t>(w) * h; ++i) {
    out.dx[static_cast<size_t>(i)] = get_f32le(bytes.data() + 12 + i * 8);
    out.dy[static_cast<size_t>(i)] = get_f32le(bytes.data() + 12 + i * 8 + 4);
  }
  return out;
}

FlowField analytic_flow(const synth::SynthScene& scene, int from_t, int to_t) {
  if (from_t < 0 || from_t >= scene.frames || to_t < 0 || to_t >= scene.frames)
    throw std::invalid_argument("analytic_flow: frame index outside sequence");
  FlowField out(scene.width, scene.height);

  // front-most first
  std::vector<const synth::ObjectSpec*> order;
  for (const auto& o : scene.objects) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->depth > b->depth; });

  const double dt = to_t - from_t;
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      const size_t p = static_cast<size_t>(y) * scene.width + x;
      double fx = scene.bg_vx * dt, fy = scene.bg_vy * dt;
      for (const auto* o : order) {
        // motion support is the union of both endpoints' footprints, so the
        // strip a moving object vacates still carries its motion
        if (!synth::object_covers(*o, from_t, x, y) && !synth::object_covers(*o, to_t, x, y))
          continue;
        auto [cfx, cfy] = synth::object_center(*o, from_t);
        auto [ctx, cty] = synth::object_center(*o, to_t);
        const double dth = (synth::object_angle_deg(*o, to_t) - synth::object_angle_deg(*o, from_t)) *
                           3.14159265358979323846 / 180.0;
        const double cs = std::cos(dth), sn = std::sin(dth);
        const double rx = x - cfx, ry = y - cfy;
        fx = ctx + cs * rx - sn * ry - x;
        fy = cty + sn * rx + cs * ry - y;
        break;
      }
      out.dx[p] = static_cast<float>(fx);
      out.dy[p] = static_cast<float>(fy);
    }
  }
  return out;
}

}  // namespace rvos::flow
