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
#include <string>
#include <vector>

namespace rvos::img {

/// RGB frame, planar channel-major floats in [0,1]: rgb[c*H*W + y*W + x].
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;

  float& at(int c, int y, int x) { return rgb[(static_cast<size_t>(c) * height + y) * width + x]; }
  float at(int c, int y, int x) const {
    return rgb[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

/// Single-channel float map. Used both for probability maps in [0,1] and for
/// generic scalar fields (e.g. flow magnitudes).
struct GrayMap {
  int width = 0;
  int height = 0;
  std::vector<float> v;

  GrayMap() = default;
  GrayMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), v(static_cast<size_t>(w) * h, fill) {}
  float& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
  float at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
};

using ProbMap = GrayMap;

/// Instance label map, 0 = background, 1..N = object ids.
struct LabelMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> labels;

  LabelMask() = default;
  LabelMask(int w, int h) : width(w), height(h), labels(static_cast<size_t>(w) * h, 0) {}
  uint8_t& at(int y, int x) { return labels[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return labels[static_cast<size_t>(y) * width + x]; }
};

/// Binary foreground mask, values 0/1.
struct BinMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> fg;

  BinMask() = default;
  BinMask(int w, int h) : width(w), height(h), fg(static_cast<size_t>(w) * h, 0) {}
  uint8_t& at(int y, int x) { return fg[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int y, int x) const { return fg[static_cast<size_t>(y) * width + x]; }
  int64_t area() const {
    int64_t a = 0;
    for (uint8_t p : fg) a += p ? 1 : 0;
    return a;
  }
};

/// Per-pixel displacement (dx, dy) in pixels.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> dx, dy;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h), dx(static_cast<size_t>(w) * h, 0.0f),
        dy(static_cast<size_t>(w) * h, 0.0f) {}
};

/// Axis-aligned box, [x_min, x_max) x [y_min, y_max) in pixels.
struct BBox {
  float x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  float width() const { return x_max - x_min; }
  float height() const { return y_max - y_min; }
  float center_x() const { return 0.5f * (x_min + x_max); }
  float center_y() const { return 0.5f * (y_min + y_max); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
};

BinMask mask_for_label(const LabelMask& m, int label);
GrayMap to_gray(const BinMask& m);
BinMask threshold(const GrayMap& p, float tau);

// ---- file I/O (PNG via libpng, JPEG via libjpeg) --------------------------

/// Loads a .png or .jpg image as an RGB frame in [0,1].
Frame load_image(const std::string& path);

/// Loads an indexed-palette (or 8-bit grayscale) PNG as a label map; the
/// palette index is the instance id.
LabelMask load_label_png(const std::string& path);

/// Writes labels as an 8-bit indexed PNG with the fixed instance palette.
/// load_label_png(save_label_png(m)) == m exactly.
void save_label_png(const LabelMask& m, const std::string& path);

void save_rgb_png(const Frame& f, const std::string& path);

/// Fixed 256-entry palette; entry 0 is black, entry i is the display color
/// of instance i (bit-reversal construction, stable across runs).
std::array<uint8_t, 3> instance_color(int id);

}  // namespace rvos::img
