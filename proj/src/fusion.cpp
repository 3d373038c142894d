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

#include "rvos/fusion.hpp"

#include <stdexcept>

namespace rvos::fusion {

void FusionConfig::validate() const {
  if (!(tau > 0.0f && tau < 1.0f))
    throw std::invalid_argument("fusion: tau must be in (0,1)");
}

img::LabelMask fuse(const std::vector<img::ProbMap>& maps, const FusionConfig& cfg) {
  cfg.validate();
  if (maps.empty()) throw std::invalid_argument("fuse: empty map list");
  const int w = maps[0].width, h = maps[0].height;
  for (const auto& m : maps)
    if (m.width != w || m.height != h)
      throw std::invalid_argument("fuse: probability map dimensions differ");

  img::LabelMask out(w, h);
  for (int64_t p = 0; p < static_cast<int64_t>(w) * h; ++p) {
    float best = maps[0].v[static_cast<size_t>(p)];
    int best_i = 0;
    for (size_t i = 1; i < maps.size(); ++i)
      if (maps[i].v[static_cast<size_t>(p)] > best) {
        best = maps[i].v[static_cast<size_t>(p)];
        best_i = static_cast<int>(i);
      }
    out.labels[static_cast<size_t>(p)] = best >= cfg.tau ? static_cast<uint8_t>(best_i + 1) : 0;
  }
  return out;
}

}  // namespace rvos::fusion
