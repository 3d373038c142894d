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

#include <nlohmann/json_fwd.hpp>

#include "rvos/metrics.hpp"
#include "rvos/pipeline.hpp"

namespace rvos::config {

/// Everything a run needs, mirroring the JSON document. Unknown keys are
/// rejected so typos fail loudly.
struct RunConfig {
  pipeline::PipelineConfig pipe;
  metrics::MetricsConfig metrics;
  int threads = 0;  // 0 = pick automatically
};

RunConfig from_json(const nlohmann::json& doc);
RunConfig load(const std::string& path);
/// Full echo, defaults included; written into run manifests.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace rvos::config
