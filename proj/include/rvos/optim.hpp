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

#include <map>
#include <string>
#include <vector>

#include "rvos/tensor.hpp"

namespace rvos::ad {

/// Named trainable parameters. std::map keeps iteration sorted by name so
/// every pass over the store is order-deterministic.
class ParamStore {
 public:
  TensorRef add(const std::string& name, TensorRef t);
  const TensorRef& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  size_t size() const { return params_.size(); }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads();
  /// Copies every `src_prefix...` entry to `dst_prefix...` as fresh params.
  void clone_namespace(const std::string& src_prefix, const std::string& dst_prefix);
  bool has_namespace(const std::string& prefix) const;
  std::vector<std::string> names_under(const std::string& prefix) const;

 private:
  std::map<std::string, TensorRef> params_;
};

struct AdamState {
  float learning_rate = 1e-5f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  int64_t step = 0;
  std::map<std::string, std::vector<float>> m;
  std::map<std::string, std::vector<float>> v;
};

/// One Adam update with bias correction over every parameter in the store.
/// Each parameter must carry a gradient buffer; buffers are zeroed after the
/// update. `prefix` limits the update to one namespace (empty = all).
void adam_step(ParamStore& params, AdamState& state, const std::string& prefix = "");

/// Checkpoint: magic "RVCP", u32 LE manifest length, JSON manifest listing
/// name/shape/offset/count per parameter, then one little-endian f32 blob.
/// Round-trips are bit-exact.
void save_checkpoint(const ParamStore& params, const std::string& path);
ParamStore load_checkpoint(const std::string& path);

}  // namespace rvos::ad
