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
#include <functional>

namespace rvos {

/// Global worker cap shared by all kernels. 1 disables threading entirely.
int worker_threads();
void set_worker_threads(int n);

/// Runs fn(begin, end) over a partition of [0, n). Each chunk owns a disjoint
/// index range, so results are identical for any thread count as long as the
/// callee writes only to indices it was given.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace rvos
