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

#include <vector>

#include "rvos/image.hpp"

namespace rvos::fusion {

struct FusionConfig {
  float tau = 0.5f;  // background threshold in (0,1)

  void validate() const;
};

/// Per-pixel label = argmax over the N per-object probability maps if the
/// max reaches tau, else 0 (background). Ties break toward the lowest
/// object index. Test-time only; no gradient path.
img::LabelMask fuse(const std::vector<img::ProbMap>& maps, const FusionConfig& cfg);

}  // namespace rvos::fusion
