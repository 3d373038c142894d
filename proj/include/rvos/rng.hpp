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

#include <cmath>
#include <cstdint>
#include <random>

namespace rvos {

/// Deterministic random source. All draws are built from raw mt19937 words
/// instead of std distributions so that streams are reproducible across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(uint32_t seed) : gen_(seed) {}

  uint32_t next_u32() { return gen_(); }

  /// Uniform in [0, 1) with 24 bits of resolution.
  float uniform() { return static_cast<float>(gen_() >> 8) * (1.0f / 16777216.0f); }

  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<uint32_t>(n)); }

  bool bernoulli(float p) { return uniform() < p; }

  /// Standard normal via Box-Muller; caches the second deviate.
  float normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    float u1 = uniform();
    float u2 = uniform();
    if (u1 < 1e-12f) u1 = 1e-12f;
    const float r = std::sqrt(-2.0f * std::log(u1));
    const float theta = 6.28318530717958647692f * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  /// Derives an independent child stream. Used to give each video/object its
  /// own reproducible sequence regardless of processing order.
  Rng fork(uint32_t stream) {
    uint32_t s = next_u32();
    s ^= stream + 0x9e3779b9u + (s << 6) + (s >> 2);
    return Rng(s);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937 gen_;
  float cached_ = 0.0f;
  bool has_cached_ = false;
};

}  // namespace rvos
