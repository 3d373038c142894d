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

#include <string>

#include "rvos/image.hpp"

namespace rvos::synth {
struct SynthScene;
}

namespace rvos::flow {

struct FlowParams {
  float alpha = 0.2f;   // smoothness weight, scaled for [0,1] intensities
  int iterations = 100; // Jacobi sweeps per warp
  int levels = 4;       // pyramid levels (capped so the top stays >= 16 px)
  int warps = 2;        // re-linearizations per level
};

/// Dense flow between two frames: returns F with I_a(p) ~= I_b(p + F(p)).
/// Coarse-to-fine Horn-Schunck on grayscale; deterministic for fixed params.
img::FlowField estimate_flow(const img::Frame& a, const img::Frame& b, const FlowParams& params);

/// Middlebury .flo: magic float 202021.25, int32 width/height, then
/// row-major interleaved (dx, dy) f32, all little-endian. Bit-exact.
img::FlowField read_flo(const std::string& path);
void write_flo(const img::FlowField& field, const std::string& path);

/// Exact flow of a parametric scene between two frames: F(p) is the
/// displacement from p (at from_t) to the matching point at to_t. A pixel
/// takes the motion of the front-most object covering it at either
/// endpoint, else the background motion.
img::FlowField analytic_flow(const synth::SynthScene& scene, int from_t, int to_t);

}  // namespace rvos::flow
