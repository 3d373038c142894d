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

#include <cstdint>
#include <string>
#include <vector>

#include "rvos/dataset.hpp"
#include "rvos/image.hpp"

namespace rvos::synth {

enum class ShapeKind { Disk, Rect, Polygon };

/// One textured rigid object with a linear trajectory and constant spin.
struct ObjectSpec {
  ShapeKind kind = ShapeKind::Disk;
  double radius = 10.0;                            // disk
  double half_w = 8.0, half_h = 6.0;               // rect
  std::vector<std::pair<double, double>> polygon;  // local convex vertices

  double cx0 = 32.0, cy0 = 32.0;  // center at frame 0
  double vx = 0.0, vy = 0.0;      // px/frame
  double omega_deg = 0.0;         // deg/frame about the center
  uint32_t texture_seed = 1;
  int depth = 0;        // higher draws in front
  bool tracked = true;  // false = distractor: rendered, never annotated
};

struct SynthScene {
  std::string name = "scene";
  int width = 64, height = 64, frames = 12;
  uint32_t background_seed = 7;
  double bg_vx = 0.0, bg_vy = 0.0;

  std::vector<ObjectSpec> objects;

  int tracked_count() const {
    int n = 0;
    for (const auto& o : objects) n += o.tracked ? 1 : 0;
    return n;
  }
};

/// Center and orientation of an object at frame t.
std::pair<double, double> object_center(const ObjectSpec& o, int t);
double object_angle_deg(const ObjectSpec& o, int t);
bool object_covers(const ObjectSpec& o, int t, double px, double py);

/// Renders frames, exact label masks, and analytic flows (both directions)
/// for the scene. `seed` re-keys the textures; geometry stays fixed.
/// Throws if any object's visible area drops below half its full area.
data::VideoRecord generate(const SynthScene& scene, uint32_t seed);

/// Deterministic scene suites used by training/eval fixtures. All motions
/// are <= 3 px/frame and objects keep at least half their area on canvas.
std::vector<SynthScene> training_suite(uint32_t seed);
std::vector<SynthScene> heldout_suite(uint32_t seed);
/// Held-out scenes that contain a similar-textured untracked distractor;
/// exercising box restriction against far-from-object outliers.
std::vector<SynthScene> outlier_suite(uint32_t seed);

/// Smaller variants for ablation sweeps (fewer/shorter/smaller videos).
std::vector<SynthScene> small_training_suite(uint32_t seed);
std::vector<SynthScene> small_heldout_suite(uint32_t seed);

/// Two textured objects passing each other with a partial occlusion.
SynthScene crossing_scene(uint32_t seed);

/// Translation-only scenes used as the warping oracle: single textured
/// object, constant velocity <= 3 px/frame.
std::vector<SynthScene> warp_oracle_scenes(uint32_t seed);

}  // namespace rvos::synth
