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
#include <string>
#include <vector>

#include "rvos/image.hpp"

namespace rvos::data {

/// One video sequence with whatever ground truth is available.
struct VideoRecord {
  std::string name;
  int n_objects = 0;
  std::vector<img::Frame> frames;
  std::vector<img::LabelMask> masks;       // empty entries possible past frame 0
  std::vector<std::string> frame_names;    // basename without extension
  std::vector<std::optional<img::FlowField>> flow_bwd;  // [t]: t -> t-1 (t >= 1)
  std::vector<std::optional<img::FlowField>> flow_fwd;  // [t]: t -> t+1 (t < T-1)
  bool outlier_scene = false;  // tagged by the generator for ablation splits

  int frame_count() const { return static_cast<int>(frames.size()); }
  bool has_mask(int t) const {
    return t < static_cast<int>(masks.size()) && masks[static_cast<size_t>(t)].width > 0;
  }
};

/// Directory layout:
///   root/JPEGImages/<seq>/<frame>.png|.jpg
///   root/Annotations/<seq>/<frame>.png       (indexed palette, id = instance)
///   root/OpticalFlow/<seq>/<frame>_fwd.flo   (optional, flow t -> t+1)
///   root/OpticalFlow/<seq>/<frame>_bwd.flo   (optional, flow t -> t-1)
///   root/manifest.json                       (optional sequence list/tags)
struct LoadOptions {
  bool load_flows = true;
  bool require_first_annotation = true;
};

std::vector<VideoRecord> load_davis(const std::string& root, const LoadOptions& opts = {});
VideoRecord load_sequence(const std::string& root, const std::string& seq,
                          const LoadOptions& opts = {});

/// Writes a record in the layout above (frames as PNG, masks as indexed
/// PNG, flows as .flo sidecars) and appends it to root/manifest.json.
void save_video(const VideoRecord& video, const std::string& root);

/// Prediction masks as indexed PNGs named after the input frames.
void save_predictions(const std::vector<img::LabelMask>& masks,
                      const std::vector<std::string>& frame_names, const std::string& out_dir);

std::vector<img::LabelMask> load_predictions(const std::string& dir);

}  // namespace rvos::data
