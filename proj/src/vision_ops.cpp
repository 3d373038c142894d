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

#include "rvos/vision_ops.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace rvos::vision {

namespace {

// Bilinear read with zero outside the image.
double sample_zero(const float* data, int w, int h, double sx, double sy) {
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0, fy = sy - y0;
  double acc = 0.0;
  const double ws[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
  const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
  for (int k = 0; k < 4; ++k)
    if (xs[k] >= 0 && xs[k] < w && ys[k] >= 0 && ys[k] < h)
      acc += ws[k] * data[static_cast<int64_t>(ys[k]) * w + xs[k]];
  return acc;
}

void check_flow_dims(int w, int h, const FlowField& flow) {
  if (flow.width != w || flow.height != h)
    throw std::invalid_argument("flow dims " + std::to_string(flow.width) + "x" +
                                std::to_string(flow.height) + " do not match image " +
                                std::to_string(w) + "x" + std::to_string(h));
}

}  // namespace

GrayMap warp_backward(const GrayMap& src, const FlowField& flow) {
  check_flow_dims(src.width, src.height, flow);
  GrayMap out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      const size_t p = static_cast<size_t>(y) * src.width + x;
      out.v[p] = static_cast<float>(
          sample_zero(src.v.data(), src.width, src.height, x + static_cast<double>(flow.dx[p]),
                      y + static_cast<double>(flow.dy[p])));
    }
  return out;
}

Frame warp_backward(const Frame& src, const FlowField& flow) {
  check_flow_dims(src.width, src.height, flow);
  Frame out;
  out.width = src.width;
  out.height = src.height;
  out.rgb.assign(src.rgb.size(), 0.0f);
  const int64_t plane = static_cast<int64_t>(src.width) * src.height;
  for (int c = 0; c < 3; ++c) {
    const float* sp = src.rgb.data() + c * plane;
    float* op = out.rgb.data() + c * plane;
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        const size_t p = static_cast<size_t>(y) * src.width + x;
        op[p] = static_cast<float>(sample_zero(sp, src.width, src.height,
                                               x + static_cast<double>(flow.dx[p]),
                                               y + static_cast<double>(flow.dy[p])));
      }
  }
  return out;
}

GrayMap flow_magnitude(const FlowField& flow) {
  GrayMap out(flow.width, flow.height);
  for (size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = static_cast<float>(std::sqrt(static_cast<double>(flow.dx[i]) * flow.dx[i] +
                                            static_cast<double>(flow.dy[i]) * flow.dy[i]));
  return out;
}

std::optional<BBox> tight_bbox(const BinMask& mask, int min_area) {
  int x_lo = mask.width, x_hi = -1, y_lo = mask.height, y_hi = -1;
  int64_t area = 0;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(y, x)) {
        ++area;
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
  if (area == 0 || area < min_area) return std::nullopt;
  return BBox{static_cast<float>(x_lo), static_cast<float>(y_lo), static_cast<float>(x_hi + 1),
              static_cast<float>(y_hi + 1)};
}

std::vector<int> connected_components(const BinMask& mask, int& count) {
  std::vector<int> labels(mask.fg.size(), 0);
  count = 0;
  std::deque<int64_t> queue;
  for (int64_t start = 0; start < static_cast<int64_t>(mask.fg.size()); ++start) {
    if (!mask.fg[static_cast<size_t>(start)] || labels[static_cast<size_t>(start)]) continue;
    ++count;
    labels[static_cast<size_t>(start)] = count;
    queue.push_back(start);
    while (!queue.empty()) {
      const int64_t p = queue.front();
      queue.pop_front();
      const int y = static_cast<int>(p / mask.width);
      const int x = static_cast<int>(p % mask.width);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= mask.width || ny[k] < 0 || ny[k] >= mask.height) continue;
        const int64_t q = static_cast<int64_t>(ny[k]) * mask.width + nx[k];
        if (mask.fg[static_cast<size_t>(q)] && !labels[static_cast<size_t>(q)]) {
          labels[static_cast<size_t>(q)] = count;
          queue.push_back(q);
        }
      }
    }
  }
  return labels;
}

BinMask contour_extract(const BinMask& mask) {
  BinMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      const bool border = x == 0 || x == mask.width - 1 || y == 0 || y == mask.height - 1;
      if (border || !mask.at(y, x - 1) || !mask.at(y, x + 1) || !mask.at(y - 1, x) ||
          !mask.at(y + 1, x))
        out.at(y, x) = 1;
    }
  return out;
}

namespace {
std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offs;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offs.emplace_back(dx, dy);
  return offs;
}
}  // namespace

BinMask dilate(const BinMask& mask, int radius) {
  if (radius <= 0) return mask;
  const auto offs = disk_offsets(radius);
  BinMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      for (auto [dx, dy] : offs) {
        const int nx = x + dx, ny = y + dy;
        if (nx >= 0 && nx < mask.width && ny >= 0 && ny < mask.height) out.at(ny, nx) = 1;
      }
    }
  return out;
}

BinMask erode(const BinMask& mask, int radius) {
  if (radius <= 0) return mask;
  const auto offs = disk_offsets(radius);
  BinMask out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      bool all = true;
      for (auto [dx, dy] : offs) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height || !mask.at(ny, nx)) {
          all = false;
          break;
        }
      }
      if (all) out.at(y, x) = 1;
    }
  return out;
}

namespace {
struct Tap {
  int lo, hi;
  double w_hi;
};

std::vector<Tap> taps_for(int in_extent, int out_extent) {
  std::vector<Tap> taps(static_cast<size_t>(out_extent));
  const double s = static_cast<double>(in_extent) / out_extent;
  for (int i = 0; i < out_extent; ++i) {
    double src = (i + 0.5) * s - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_extent - 1));
    const int lo = static_cast<int>(src);
    taps[static_cast<size_t>(i)] = {lo, std::min(lo + 1, in_extent - 1), src - lo};
  }
  return taps;
}

void resize_plane(const float* src, int w, int h, float* dst, int ow, int oh) {
  const auto ty = taps_for(h, oh);
  const auto tx = taps_for(w, ow);
  for (int y = 0; y < oh; ++y) {
    const Tap& a = ty[static_cast<size_t>(y)];
    for (int x = 0; x < ow; ++x) {
      const Tap& b = tx[static_cast<size_t>(x)];
      const double top = src[a.lo * w + b.lo] * (1 - b.w_hi) + src[a.lo * w + b.hi] * b.w_hi;
      const double bot = src[a.hi * w + b.lo] * (1 - b.w_hi) + src[a.hi * w + b.hi] * b.w_hi;
      dst[static_cast<int64_t>(y) * ow + x] =
          static_cast<float>(top * (1 - a.w_hi) + bot * a.w_hi);
    }
  }
}
}  // namespace

GrayMap resize_bilinear(const GrayMap& src, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw std::invalid_argument("resize_bilinear: target size must be positive");
  GrayMap out(out_w, out_h);
  resize_plane(src.v.data(), src.width, src.height, out.v.data(), out_w, out_h);
  return out;
}

Frame resize_bilinear(const Frame& src, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1)
    throw std::invalid_argument("resize_bilinear: target size must be positive");
  Frame out;
  out.width = out_w;
  out.height = out_h;
  out.rgb.assign(static_cast<size_t>(out_w) * out_h * 3, 0.0f);
  const int64_t sp = static_cast<int64_t>(src.width) * src.height;
  const int64_t op = static_cast<int64_t>(out_w) * out_h;
  for (int c = 0; c < 3; ++c)
    resize_plane(src.rgb.data() + c * sp, src.width, src.height, out.rgb.data() + c * op, out_w,
                 out_h);
  return out;
}

Affine Affine::then(const Affine& outer) const {
  // outer(this(p))
  Affine r;
  r.a = outer.a * a + outer.b * d;
  r.b = outer.a * b + outer.b * e;
  r.c = outer.a * c + outer.b * f + outer.c;
  r.d = outer.d * a + outer.e * d;
  r.e = outer.d * b + outer.e * e;
  r.f = outer.d * c + outer.e * f + outer.f;
  return r;
}

std::pair<double, double> Affine::apply(double x, double y) const {
  return {a * x + b * y + c, d * x + e * y + f};
}

Affine scene_transform(int width, int height, bool hflip, double angle_deg, double scale,
                       double tx, double ty) {
  if (scale <= 0.0) throw std::invalid_argument("scene_transform: scale must be positive");
  const double cx = 0.5 * (width - 1), cy = 0.5 * (height - 1);
  const double th = angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  // Output->input: undo translation, unscale, unrotate, unflip about center.
  Affine m;
  const double inv_s = 1.0 / scale;
  const double fa = hflip ? -1.0 : 1.0;
  m.a = fa * cs * inv_s;
  m.b = fa * sn * inv_s;
  m.d = -sn * inv_s;
  m.e = cs * inv_s;
  const double ox = cx + tx, oy = cy + ty;
  m.c = -(m.a * ox + m.b * oy) + cx;
  m.f = -(m.d * ox + m.e * oy) + cy;
  return m;
}

GrayMap affine_sample(const GrayMap& src, const Affine& out_to_in) {
  GrayMap out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      auto [sx, sy] = out_to_in.apply(x, y);
      out.at(y, x) = static_cast<float>(sample_zero(src.v.data(), src.width, src.height, sx, sy));
    }
  return out;
}

Frame affine_sample(const Frame& src, const Affine& out_to_in) {
  Frame out;
  out.width = src.width;
  out.height = src.height;
  out.rgb.assign(src.rgb.size(), 0.0f);
  const int64_t plane = static_cast<int64_t>(src.width) * src.height;
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      auto [sx, sy] = out_to_in.apply(x, y);
      for (int c = 0; c < 3; ++c)
        out.rgb[c * plane + static_cast<int64_t>(y) * src.width + x] = static_cast<float>(
            sample_zero(src.rgb.data() + c * plane, src.width, src.height, sx, sy));
    }
  return out;
}

BinMask affine_sample_mask(const BinMask& src, const Affine& out_to_in) {
  BinMask out(src.width, src.height);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < src.width; ++x) {
      auto [sx, sy] = out_to_in.apply(x, y);
      const int ix = static_cast<int>(std::lround(sx));
      const int iy = static_cast<int>(std::lround(sy));
      if (ix >= 0 && ix < src.width && iy >= 0 && iy < src.height) out.at(y, x) = src.at(iy, ix);
    }
  return out;
}

PerturbDraw draw_perturbation(const BinMask& mask, Rng& rng) {
  PerturbDraw d;
  if (rng.bernoulli(0.5f)) d.dilate_radius = 1 + rng.uniform_int(5);
  if (rng.bernoulli(0.5f)) d.scale = rng.uniform(0.9f, 1.1f);
  if (rng.bernoulli(0.5f)) d.angle_deg = rng.uniform(-10.0f, 10.0f);
  if (rng.bernoulli(0.5f)) d.shear = rng.uniform(-0.1f, 0.1f);
  if (rng.bernoulli(0.5f)) {
    if (auto box = tight_bbox(mask, 1)) {
      d.tx = rng.uniform(-0.1f, 0.1f) * box->width();
      d.ty = rng.uniform(-0.1f, 0.1f) * box->height();
    }
  }
  return d;
}

BinMask apply_perturbation(const BinMask& mask, const PerturbDraw& draw) {
  BinMask work = draw.dilate_radius > 0 ? dilate(mask, draw.dilate_radius) : mask;
  const bool affine_neutral = draw.scale == 1.0 && draw.angle_deg == 0.0 && draw.tx == 0.0 &&
                              draw.ty == 0.0 && draw.shear == 0.0;
  if (affine_neutral) return work;

  // Rotate/scale/shear about the object center so the jitter stays local.
  double cx = 0.5 * (mask.width - 1), cy = 0.5 * (mask.height - 1);
  if (auto box = tight_bbox(work, 1)) {
    cx = box->center_x();
    cy = box->center_y();
  }
  const double th = draw.angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double inv_s = 1.0 / draw.scale;
  const double ra = cs * inv_s, rb = sn * inv_s;
  const double rd = -sn * inv_s, re = cs * inv_s;
  Affine m;
  // shear inverse [1 -k; 0 1] composed after unrotation
  m.a = ra - draw.shear * rd;
  m.b = rb - draw.shear * re;
  m.d = rd;
  m.e = re;
  const double ox = cx + draw.tx, oy = cy + draw.ty;
  m.c = -(m.a * ox + m.b * oy) + cx;
  m.f = -(m.d * ox + m.e * oy) + cy;
  return affine_sample_mask(work, m);
}

BinMask perturb_mask(const BinMask& mask, Rng& rng) {
  return apply_perturbation(mask, draw_perturbation(mask, rng));
}

AugmentDraw draw_augment(int width, int height, const AugmentParams& params, Rng& rng) {
  AugmentDraw d;
  d.hflip = rng.bernoulli(static_cast<float>(params.flip_prob));
  d.angle_deg = rng.uniform(static_cast<float>(-params.max_angle_deg),
                            static_cast<float>(params.max_angle_deg));
  d.scale = rng.uniform(static_cast<float>(params.scale_lo), static_cast<float>(params.scale_hi));
  d.tx = rng.uniform(static_cast<float>(-params.max_translate_frac),
                     static_cast<float>(params.max_translate_frac)) *
         width;
  d.ty = rng.uniform(static_cast<float>(-params.max_translate_frac),
                     static_cast<float>(params.max_translate_frac)) *
         height;
  d.crop_w = params.crop_width > 0 ? params.crop_width : width;
  d.crop_h = params.crop_height > 0 ? params.crop_height : height;
  d.crop_x = d.crop_w < width ? rng.uniform_int(width - d.crop_w + 1) : 0;
  d.crop_y = d.crop_h < height ? rng.uniform_int(height - d.crop_h + 1) : 0;
  return d;
}

AugmentedPair apply_augment(const Frame& frame, const BinMask& mask, const FlowField& flow,
                            const AugmentDraw& draw) {
  if (frame.width != mask.width || frame.height != mask.height || flow.width != frame.width ||
      flow.height != frame.height)
    throw std::invalid_argument("augment: frame/mask/flow dimensions differ");
  if (draw.crop_w < 8 || draw.crop_h < 8)
    throw std::invalid_argument("augment: crop smaller than 8x8 rejected");

  const Affine scene = scene_transform(frame.width, frame.height, draw.hflip, draw.angle_deg,
                                       draw.scale, draw.tx, draw.ty);
  Affine crop;  // output pixel -> canvas pixel
  crop.c = draw.crop_x;
  crop.f = draw.crop_y;
  const Affine total = crop.then(scene);

  AugmentedPair out;
  out.frame.width = draw.crop_w;
  out.frame.height = draw.crop_h;
  out.frame.rgb.assign(static_cast<size_t>(draw.crop_w) * draw.crop_h * 3, 0.0f);
  out.mask = BinMask(draw.crop_w, draw.crop_h);
  out.flow = FlowField(draw.crop_w, draw.crop_h);

  // Linear part of the forward scene map; flow vectors ride along with it.
  const double th = draw.angle_deg * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double fa = draw.hflip ? -1.0 : 1.0;
  const double la = draw.scale * cs * fa, lb = -draw.scale * sn;
  const double lc = draw.scale * sn * fa, ld = draw.scale * cs;

  const int64_t in_plane = static_cast<int64_t>(frame.width) * frame.height;
  const int64_t out_plane = static_cast<int64_t>(draw.crop_w) * draw.crop_h;
  for (int y = 0; y < draw.crop_h; ++y)
    for (int x = 0; x < draw.crop_w; ++x) {
      auto [sx, sy] = total.apply(x, y);
      const int64_t p = static_cast<int64_t>(y) * draw.crop_w + x;
      for (int c = 0; c < 3; ++c)
        out.frame.rgb[c * out_plane + p] = static_cast<float>(
            sample_zero(frame.rgb.data() + c * in_plane, frame.width, frame.height, sx, sy));
      const int ix = static_cast<int>(std::lround(sx));
      const int iy = static_cast<int>(std::lround(sy));
      if (ix >= 0 && ix < frame.width && iy >= 0 && iy < frame.height)
        out.mask.fg[static_cast<size_t>(p)] = mask.at(iy, ix);
      const double fx = sample_zero(flow.dx.data(), flow.width, flow.height, sx, sy);
      const double fy = sample_zero(flow.dy.data(), flow.width, flow.height, sx, sy);
      out.flow.dx[static_cast<size_t>(p)] = static_cast<float>(la * fx + lb * fy);
      out.flow.dy[static_cast<size_t>(p)] = static_cast<float>(lc * fx + ld * fy);
    }
  return out;
}

BinMask apply_augment_mask(const BinMask& mask, const AugmentDraw& draw) {
  if (draw.crop_w < 8 || draw.crop_h < 8)
    throw std::invalid_argument("augment: crop smaller than 8x8 rejected");
  const Affine scene = scene_transform(mask.width, mask.height, draw.hflip, draw.angle_deg,
                                       draw.scale, draw.tx, draw.ty);
  Affine crop;
  crop.c = draw.crop_x;
  crop.f = draw.crop_y;
  const Affine total = crop.then(scene);
  BinMask out(draw.crop_w, draw.crop_h);
  for (int y = 0; y < draw.crop_h; ++y)
    for (int x = 0; x < draw.crop_w; ++x) {
      auto [sx, sy] = total.apply(x, y);
      const int ix = static_cast<int>(std::lround(sx));
      const int iy = static_cast<int>(std::lround(sy));
      if (ix >= 0 && ix < mask.width && iy >= 0 && iy < mask.height) out.at(y, x) = mask.at(iy, ix);
    }
  return out;
}

AugmentedPair augment_pair(const Frame& frame, const BinMask& mask, const FlowField& flow,
                           const AugmentParams& params, Rng& rng) {
  if (params.crop_width != 0 && (params.crop_width < 8 || params.crop_height < 8))
    throw std::invalid_argument("augment: crop smaller than 8x8 rejected");
  return apply_augment(frame, mask, flow, draw_augment(frame.width, frame.height, params, rng));
}

}  // namespace rvos::vision
