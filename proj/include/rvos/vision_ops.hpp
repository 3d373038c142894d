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

#include <optional>

#include "rvos/image.hpp"
#include "rvos/rng.hpp"

namespace rvos::vision {

using img::BBox;
using img::BinMask;
using img::FlowField;
using img::Frame;
using img::GrayMap;

/// out(p) = bilinear(src, p + flow(p)); samples outside the image read 0.
GrayMap warp_backward(const GrayMap& src, const FlowField& flow);
Frame warp_backward(const Frame& src, const FlowField& flow);

/// Per-pixel sqrt(dx^2 + dy^2).
GrayMap flow_magnitude(const FlowField& flow);

/// Tight box around foreground; absent when the area is below min_area.
std::optional<BBox> tight_bbox(const BinMask& mask, int min_area);

/// 4-connected component labels (0 = background, 1..count = components).
std::vector<int> connected_components(const BinMask& mask, int& count);

/// Foreground pixels with at least one 4-neighbor background pixel; pixels
/// on the image border count their outside neighbors as background.
BinMask contour_extract(const BinMask& mask);

/// Morphology with a disk structuring element of the given radius.
BinMask dilate(const BinMask& mask, int radius);
BinMask erode(const BinMask& mask, int radius);

GrayMap resize_bilinear(const GrayMap& src, int out_w, int out_h);
Frame resize_bilinear(const Frame& src, int out_w, int out_h);

// ---- affine resampling ----------------------------------------------------

/// 2x3 affine map from output pixel coordinates to input pixel coordinates.
struct Affine {
  // in_x = a*x + b*y + c ; in_y = d*x + e*y + f
  double a = 1, b = 0, c = 0, d = 0, e = 1, f = 0;

  static Affine identity() { return {}; }
  /// Composition: (m1 * m2)(p) = m1(m2(p)).
  Affine then(const Affine& outer) const;
  std::pair<double, double> apply(double x, double y) const;
};

/// Output->input map for a scene transform consisting of (in order applied
/// to content): horizontal flip, rotation by angle_deg about the canvas
/// center, uniform scale about the center, then translation by (tx, ty).
Affine scene_transform(int width, int height, bool hflip, double angle_deg, double scale,
                       double tx, double ty);

GrayMap affine_sample(const GrayMap& src, const Affine& out_to_in);
Frame affine_sample(const Frame& src, const Affine& out_to_in);
BinMask affine_sample_mask(const BinMask& src, const Affine& out_to_in);

// ---- mask perturbation ----------------------------------------------------

/// One concrete perturbation; neutral defaults leave the mask unchanged.
struct PerturbDraw {
  int dilate_radius = 0;     // 0..5
  double scale = 1.0;        // 0.9..1.1
  double angle_deg = 0.0;    // -10..10
  double tx = 0.0, ty = 0.0; // +-10% of bbox extent
  double shear = 0.0;        // -0.1..0.1
};

PerturbDraw draw_perturbation(const BinMask& mask, Rng& rng);
BinMask apply_perturbation(const BinMask& mask, const PerturbDraw& draw);
/// draw + apply; simulates an imperfect previous-frame prediction.
BinMask perturb_mask(const BinMask& mask, Rng& rng);

// ---- paired augmentation ---------------------------------------------------

struct AugmentParams {
  double scale_lo = 0.9, scale_hi = 1.1;
  double max_angle_deg = 10.0;
  double max_translate_frac = 0.1;
  double flip_prob = 0.5;
  int crop_width = 0, crop_height = 0;  // 0 = keep source size
};

struct AugmentDraw {
  bool hflip = false;
  double angle_deg = 0.0;
  double scale = 1.0;
  double tx = 0.0, ty = 0.0;
  int crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;
};

struct AugmentedPair {
  Frame frame;
  BinMask mask;
  FlowField flow;
};

AugmentDraw draw_augment(int width, int height, const AugmentParams& params, Rng& rng);

/// Applies the same geometric transform to frame, mask, and flow. Flow
/// vectors are re-oriented: flipped/rotated/scaled with the scene.
AugmentedPair apply_augment(const Frame& frame, const BinMask& mask, const FlowField& flow,
                            const AugmentDraw& draw);

/// Same transform on a mask alone (for extra per-object planes of a scene).
BinMask apply_augment_mask(const BinMask& mask, const AugmentDraw& draw);

AugmentedPair augment_pair(const Frame& frame, const BinMask& mask, const FlowField& flow,
                           const AugmentParams& params, Rng& rng);

}  // namespace rvos::vision
