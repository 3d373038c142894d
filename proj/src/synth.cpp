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

#include "rvos/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rvos/flow.hpp"
#include "rvos/rng.hpp"

namespace rvos::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint32_t hash2(int x, int y, uint32_t seed) {
  uint32_t h = seed;
  h ^= static_cast<uint32_t>(x) * 0x85ebca6bu;
  h = (h << 13) | (h >> 19);
  h ^= static_cast<uint32_t>(y) * 0xc2b2ae35u;
  h *= 0x27d4eb2fu;
  h ^= h >> 15;
  return h;
}

double lattice(int x, int y, uint32_t seed) {
  return hash2(x, y, seed) * (1.0 / 4294967296.0);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(double x, double y, uint32_t seed) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = smooth(x - x0), fy = smooth(y - y0);
  const double top = lattice(x0, y0, seed) * (1 - fx) + lattice(x0 + 1, y0, seed) * fx;
  const double bot = lattice(x0, y0 + 1, seed) * (1 - fx) + lattice(x0 + 1, y0 + 1, seed) * fx;
  return top * (1 - fy) + bot * fy;
}

// Three octaves down to a 4 px period so flow estimation has gradient
// signal everywhere.
double texture(double x, double y, uint32_t seed) {
  return 0.5 * value_noise(x / 16.0, y / 16.0, seed) +
         0.3 * value_noise(x / 8.0, y / 8.0, seed ^ 0x9e3779b9u) +
         0.2 * value_noise(x / 4.0, y / 4.0, seed ^ 0x7f4a7c15u);
}

float texture_rgb(double x, double y, uint32_t seed, int channel) {
  const double t = texture(x, y, seed ^ (0x517cc1b7u * static_cast<uint32_t>(channel + 1)));
  return static_cast<float>(std::clamp(0.12 + 0.76 * t, 0.0, 1.0));
}

double shape_extent(const ObjectSpec& o) {
  switch (o.kind) {
    case ShapeKind::Disk:
      return o.radius;
    case ShapeKind::Rect:
      return std::sqrt(o.half_w * o.half_w + o.half_h * o.half_h);
    case ShapeKind::Polygon: {
      double m = 0.0;
      for (auto [vx, vy] : o.polygon) m = std::max(m, std::sqrt(vx * vx + vy * vy));
      return m;
    }
  }
  return 0.0;
}

bool local_inside(const ObjectSpec& o, double lx, double ly) {
  switch (o.kind) {
    case ShapeKind::Disk:
      return lx * lx + ly * ly <= o.radius * o.radius;
    case ShapeKind::Rect:
      return std::abs(lx) <= o.half_w && std::abs(ly) <= o.half_h;
    case ShapeKind::Polygon: {
      // convex, counter-clockwise vertices
      const size_t n = o.polygon.size();
      if (n < 3) return false;
      for (size_t i = 0; i < n; ++i) {
        auto [x1, y1] = o.polygon[i];
        auto [x2, y2] = o.polygon[(i + 1) % n];
        if ((x2 - x1) * (ly - y1) - (y2 - y1) * (lx - x1) < 0.0) return false;
      }
      return true;
    }
  }
  return false;
}

std::pair<double, double> world_to_local(const ObjectSpec& o, int t, double px, double py) {
  auto [cx, cy] = object_center(o, t);
  const double th = -object_angle_deg(o, t) * kPi / 180.0;
  const double cs = std::cos(th), sn = std::sin(th);
  const double rx = px - cx, ry = py - cy;
  return {cs * rx - sn * ry, sn * rx + cs * ry};
}

int64_t full_pixel_area(const ObjectSpec& o, int t) {
  auto [cx, cy] = object_center(o, t);
  const int ext = static_cast<int>(std::ceil(shape_extent(o))) + 2;
  const int bx = static_cast<int>(std::floor(cx)), by = static_cast<int>(std::floor(cy));
  int64_t area = 0;
  for (int y = by - ext; y <= by + ext; ++y)
    for (int x = bx - ext; x <= bx + ext; ++x)
      if (object_covers(o, t, x, y)) ++area;
  return area;
}

}  // namespace

std::pair<double, double> object_center(const ObjectSpec& o, int t) {
  return {o.cx0 + o.vx * t, o.cy0 + o.vy * t};
}

double object_angle_deg(const ObjectSpec& o, int t) { return o.omega_deg * t; }

bool object_covers(const ObjectSpec& o, int t, double px, double py) {
  auto [lx, ly] = world_to_local(o, t, px, py);
  return local_inside(o, lx, ly);
}

data::VideoRecord generate(const SynthScene& scene, uint32_t seed) {
  if (scene.frames < 2) throw std::invalid_argument("generate: scene needs at least 2 frames");
  if (scene.objects.empty()) throw std::invalid_argument("generate: scene has no objects");

  const uint32_t bg_seed = scene.background_seed ^ (seed * 2654435761u);
  std::vector<uint32_t> obj_seed(scene.objects.size());
  for (size_t i = 0; i < scene.objects.size(); ++i)
    obj_seed[i] = scene.objects[i].texture_seed ^ hash2(static_cast<int>(i), 19, seed);

  // draw order: back to front
  std::vector<size_t> order(scene.objects.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scene.objects[a].depth < scene.objects[b].depth;
  });

  std::vector<int> label_of(scene.objects.size(), 0);
  {
    int next = 1;
    for (size_t i = 0; i < scene.objects.size(); ++i)
      if (scene.objects[i].tracked) label_of[i] = next++;
  }

  data::VideoRecord rec;
  rec.name = scene.name;
  rec.n_objects = scene.tracked_count();
  rec.outlier_scene = rec.n_objects < static_cast<int>(scene.objects.size());
  const int64_t plane = static_cast<int64_t>(scene.width) * scene.height;

  for (int t = 0; t < scene.frames; ++t) {
    img::Frame frame;
    frame.width = scene.width;
    frame.height = scene.height;
    frame.rgb.assign(static_cast<size_t>(plane) * 3, 0.0f);
    img::LabelMask mask(scene.width, scene.height);

    for (int y = 0; y < scene.height; ++y) {
      for (int x = 0; x < scene.width; ++x) {
        const int64_t p = static_cast<int64_t>(y) * scene.width + x;
        int owner = -1;
        for (size_t oi : order)
          if (object_covers(scene.objects[oi], t, x, y)) owner = static_cast<int>(oi);
        if (owner >= 0) {
          const auto& o = scene.objects[static_cast<size_t>(owner)];
          auto [lx, ly] = world_to_local(o, t, x, y);
          for (int c = 0; c < 3; ++c)
            frame.rgb[c * plane + p] = texture_rgb(lx, ly, obj_seed[static_cast<size_t>(owner)], c);
          mask.labels[static_cast<size_t>(p)] =
              static_cast<uint8_t>(label_of[static_cast<size_t>(owner)]);
        } else {
          const double bx = x - scene.bg_vx * t, by = y - scene.bg_vy * t;
          for (int c = 0; c < 3; ++c) frame.rgb[c * plane + p] = texture_rgb(bx, by, bg_seed, c);
        }
      }
    }
    rec.frames.push_back(std::move(frame));
    rec.masks.push_back(std::move(mask));

    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d", t);
    rec.frame_names.emplace_back(buf);

    for (size_t i = 0; i < scene.objects.size(); ++i) {
      const auto& o = scene.objects[i];
      if (!o.tracked) continue;
      int64_t visible = 0;
      for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x)
          if (object_covers(o, t, x, y)) ++visible;
      if (visible * 2 < full_pixel_area(o, t))
        throw std::invalid_argument("generate: object " + std::to_string(i + 1) + " of scene " +
                                    scene.name + " leaves the canvas at frame " +
                                    std::to_string(t));
    }
  }

  rec.flow_fwd.assign(static_cast<size_t>(scene.frames), std::nullopt);
  rec.flow_bwd.assign(static_cast<size_t>(scene.frames), std::nullopt);
  for (int t = 0; t + 1 < scene.frames; ++t)
    rec.flow_fwd[static_cast<size_t>(t)] = flow::analytic_flow(scene, t, t + 1);
  for (int t = 1; t < scene.frames; ++t)
    rec.flow_bwd[static_cast<size_t>(t)] = flow::analytic_flow(scene, t, t - 1);
  return rec;
}

namespace {

ObjectSpec random_object(Rng& rng, int kind_cycle, double shape_scale, int frames,
                         double max_speed, int depth, std::pair<double, double> cell_x,
                         std::pair<double, double> cell_y) {
  ObjectSpec o;
  const float s = static_cast<float>(shape_scale);
  switch (kind_cycle % 3) {
    case 0:
      o.kind = ShapeKind::Disk;
      o.radius = rng.uniform(9.0f * s, 13.0f * s);
      break;
    case 1:
      o.kind = ShapeKind::Rect;
      o.half_w = rng.uniform(7.0f * s, 11.0f * s);
      o.half_h = rng.uniform(5.0f * s, 9.0f * s);
      break;
    default: {
      o.kind = ShapeKind::Polygon;
      const int verts = 3 + rng.uniform_int(3);
      const double r = rng.uniform(9.0f * s, 12.0f * s);
      for (int k = 0; k < verts; ++k) {
        const double a = 2.0 * kPi * k / verts + rng.uniform(-0.2f, 0.2f);
        o.polygon.emplace_back(r * std::cos(a), r * std::sin(a));
      }
      break;
    }
  }
  const double x0 = rng.uniform(static_cast<float>(cell_x.first), static_cast<float>(cell_x.second));
  const double y0 = rng.uniform(static_cast<float>(cell_y.first), static_cast<float>(cell_y.second));
  const double x1 = rng.uniform(static_cast<float>(cell_x.first), static_cast<float>(cell_x.second));
  const double y1 = rng.uniform(static_cast<float>(cell_y.first), static_cast<float>(cell_y.second));
  o.cx0 = x0;
  o.cy0 = y0;
  o.vx = (x1 - x0) / (frames - 1);
  o.vy = (y1 - y0) / (frames - 1);
  const double speed = std::sqrt(o.vx * o.vx + o.vy * o.vy);
  if (speed > max_speed) {
    o.vx *= max_speed / speed;
    o.vy *= max_speed / speed;
  }
  o.omega_deg = rng.uniform(-3.0f, 3.0f);
  o.texture_seed = rng.next_u32();
  o.depth = depth;
  return o;
}

std::vector<SynthScene> build_suite(uint32_t seed, int count, int size, int frames, int max_n,
                                    const std::string& prefix, bool with_outliers) {
  Rng rng(seed);
  std::vector<SynthScene> scenes;
  const double margin = size * 0.28;
  const double shape_scale = size / 64.0;
  for (int i = 0; i < count; ++i) {
    SynthScene s;
    s.name = prefix + std::to_string(i);
    s.width = size;
    s.height = size;
    s.frames = frames;
    s.background_seed = rng.next_u32();
    const int n = 1 + i % max_n;
    // distinct horizontal bands keep multi-object scenes mostly disjoint
    for (int j = 0; j < n; ++j) {
      const double band = (size - 2 * margin) / n;
      const double y_lo = margin + j * band;
      const double y_hi = margin + (j + 1) * band;
      s.objects.push_back(random_object(rng, i + j, shape_scale, frames, 3.0, j,
                                        {margin, size - margin}, {y_lo, y_hi}));
    }
    if (with_outliers && i % 2 == 1) {
      // distractor shares the first object's texture but sits apart from it
      ObjectSpec d = s.objects[0];
      d.tracked = false;
      d.depth = -1;
      d.kind = ShapeKind::Disk;
      d.radius = 7.0;
      d.cx0 = s.objects[0].cx0 > size / 2.0 ? margin * 0.75 : size - margin * 0.75;
      d.cy0 = s.objects[0].cy0 > size / 2.0 ? margin * 0.75 : size - margin * 0.75;
      d.vx = rng.uniform(-1.0f, 1.0f);
      d.vy = rng.uniform(-1.0f, 1.0f);
      // keep the distractor on canvas over the clip
      d.vx = std::clamp(d.vx, (margin * 0.5 - d.cx0) / frames, (size - margin * 0.5 - d.cx0) / frames);
      d.vy = std::clamp(d.vy, (margin * 0.5 - d.cy0) / frames, (size - margin * 0.5 - d.cy0) / frames);
      s.objects.push_back(d);
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace

std::vector<SynthScene> training_suite(uint32_t seed) {
  return build_suite(seed ^ 0x5134u, 20, 64, 12, 3, "train", false);
}

std::vector<SynthScene> heldout_suite(uint32_t seed) {
  return build_suite(seed ^ 0xae17u, 8, 64, 12, 3, "test", true);
}

std::vector<SynthScene> small_training_suite(uint32_t seed) {
  return build_suite(seed ^ 0x77abu, 8, 48, 8, 2, "train", false);
}

std::vector<SynthScene> small_heldout_suite(uint32_t seed) {
  return build_suite(seed ^ 0x19c3u, 4, 48, 8, 2, "test", true);
}

std::vector<SynthScene> warp_oracle_scenes(uint32_t seed) {
  struct Spec {
    ShapeKind kind;
    double size, vx, vy;
  };
  const Spec specs[5] = {{ShapeKind::Disk, 12.0, 2.0, 1.0},
                         {ShapeKind::Disk, 10.0, 2.5, 0.0},
                         {ShapeKind::Rect, 10.0, 2.0, 1.0},
                         {ShapeKind::Disk, 14.0, 2.9, -1.3},
                         {ShapeKind::Rect, 12.0, 1.0, 2.0}};
  std::vector<SynthScene> scenes;
  for (int i = 0; i < 5; ++i) {
    SynthScene s;
    s.name = "warp_oracle" + std::to_string(i);
    s.width = 64;
    s.height = 64;
    s.frames = 6;
    s.background_seed = seed ^ (0x30u + static_cast<uint32_t>(i));
    ObjectSpec o;
    o.kind = specs[i].kind;
    o.radius = specs[i].size;
    o.half_w = specs[i].size;
    o.half_h = specs[i].size * 0.8;
    o.cx0 = specs[i].vx >= 0 ? 22.0 : 42.0;
    o.cy0 = specs[i].vy >= 0 ? 26.0 : 38.0;
    o.vx = specs[i].vx;
    o.vy = specs[i].vy;
    o.texture_seed = seed ^ (0x900u + static_cast<uint32_t>(i));
    s.objects = {o};
    scenes.push_back(std::move(s));
  }
  return scenes;
}

SynthScene crossing_scene(uint32_t seed) {
  SynthScene s;
  s.name = "crossing";
  s.width = 64;
  s.height = 64;
  s.frames = 12;
  s.background_seed = seed ^ 0x44u;

  ObjectSpec a;
  a.kind = ShapeKind::Disk;
  a.radius = 11.0;
  a.cx0 = 18.0;
  a.cy0 = 24.0;
  a.vx = 2.4;
  a.vy = 0.25;
  a.texture_seed = seed ^ 0x100u;
  a.depth = 1;

  ObjectSpec b;
  b.kind = ShapeKind::Rect;
  b.half_w = 9.0;
  b.half_h = 8.0;
  b.cx0 = 46.0;
  b.cy0 = 40.0;
  b.vx = -2.4;
  b.vy = -0.25;
  b.texture_seed = seed ^ 0x200u;
  b.depth = 0;

  s.objects = {a, b};
  return s;
}

}  // namespace rvos::synth
