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

#include "rvos/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rvos/flow.hpp"

namespace rvos::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_image_file(const fs::path& p) {
  const std::string e = p.extension().string();
  return e == ".png" || e == ".jpg" || e == ".jpeg" || e == ".JPG" || e == ".PNG";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

VideoRecord load_sequence(const std::string& root, const std::string& seq,
                          const LoadOptions& opts) {
  const fs::path base(root);
  const auto frame_files = sorted_images(base / "JPEGImages" / seq);
  if (frame_files.empty())
    throw std::runtime_error("sequence " + seq + ": no frames under " +
                             (base / "JPEGImages" / seq).string());

  VideoRecord rec;
  rec.name = seq;
  for (const auto& f : frame_files) {
    rec.frames.push_back(img::load_image(f.string()));
    rec.frame_names.push_back(f.stem().string());
    if (rec.frames.back().width != rec.frames.front().width ||
        rec.frames.back().height != rec.frames.front().height)
      throw std::runtime_error("sequence " + seq + ": frame " + f.stem().string() +
                               " has mismatched dimensions");
  }

  const fs::path ann_dir = base / "Annotations" / seq;
  rec.masks.assign(rec.frames.size(), img::LabelMask{});
  std::set<int> first_labels;
  std::map<int, int> remap;  // first-frame label -> 1..N
  bool warned_extra = false;
  for (size_t t = 0; t < rec.frame_names.size(); ++t) {
    const fs::path ann = ann_dir / (rec.frame_names[t] + ".png");
    if (!fs::exists(ann)) {
      if (t == 0 && opts.require_first_annotation)
        throw std::runtime_error("sequence " + seq + " rejected: no annotation for first frame");
      continue;
    }
    img::LabelMask m = img::load_label_png(ann.string());
    if (m.width != rec.frames[t].width || m.height != rec.frames[t].height)
      throw std::runtime_error("sequence " + seq + " rejected: annotation " +
                               rec.frame_names[t] + " dimensions mismatch frame");
    if (t == 0) {
      for (uint8_t l : m.labels)
        if (l) first_labels.insert(l);
      int next = 1;
      for (int l : first_labels) remap[l] = next++;
      rec.n_objects = static_cast<int>(first_labels.size());
    }
    for (auto& l : m.labels) {
      if (!l) continue;
      auto it = remap.find(l);
      if (it == remap.end()) {
        if (!warned_extra) {
          std::cerr << "warning=untracked_label seq=" << seq << " frame=" << rec.frame_names[t]
                    << " label=" << static_cast<int>(l) << " action=ignored\n";
          warned_extra = true;
        }
        l = 0;
      } else {
        l = static_cast<uint8_t>(it->second);
      }
    }
    rec.masks[t] = std::move(m);
  }
  if (opts.require_first_annotation && rec.n_objects == 0)
    throw std::runtime_error("sequence " + seq + " rejected: first annotation has no objects");

  rec.flow_bwd.assign(rec.frames.size(), std::nullopt);
  rec.flow_fwd.assign(rec.frames.size(), std::nullopt);
  if (opts.load_flows) {
    const fs::path flow_dir = base / "OpticalFlow" / seq;
    for (size_t t = 0; t < rec.frame_names.size(); ++t) {
      const fs::path fwd = flow_dir / (rec.frame_names[t] + "_fwd.flo");
      const fs::path bwd = flow_dir / (rec.frame_names[t] + "_bwd.flo");
      if (fs::exists(fwd)) rec.flow_fwd[t] = flow::read_flo(fwd.string());
      if (fs::exists(bwd)) rec.flow_bwd[t] = flow::read_flo(bwd.string());
    }
  }

  const fs::path manifest = base / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream mf(manifest);
    json doc = json::parse(mf, nullptr, /*allow_exceptions=*/false);
    if (!doc.is_discarded() && doc.contains("sequences"))
      for (const auto& e : doc["sequences"])
        if (e.is_object() && e.value("name", "") == seq) rec.outlier_scene = e.value("outlier", false);
  }
  return rec;
}

std::vector<VideoRecord> load_davis(const std::string& root, const LoadOptions& opts) {
  const fs::path imgs = fs::path(root) / "JPEGImages";
  if (!fs::is_directory(imgs))
    throw std::runtime_error("dataset root has no JPEGImages directory: " + root);
  std::vector<std::string> seqs;
  for (const auto& entry : fs::directory_iterator(imgs))
    if (entry.is_directory()) seqs.push_back(entry.path().filename().string());
  std::sort(seqs.begin(), seqs.end());
  if (seqs.empty()) throw std::runtime_error("no sequences under " + imgs.string());

  std::vector<VideoRecord> out;
  for (const auto& s : seqs) out.push_back(load_sequence(root, s, opts));
  return out;
}

void save_video(const VideoRecord& video, const std::string& root) {
  const fs::path base(root);
  const fs::path img_dir = base / "JPEGImages" / video.name;
  const fs::path ann_dir = base / "Annotations" / video.name;
  const fs::path flow_dir = base / "OpticalFlow" / video.name;
  fs::create_directories(img_dir);
  fs::create_directories(ann_dir);
  fs::create_directories(flow_dir);

  for (size_t t = 0; t < video.frames.size(); ++t) {
    img::save_rgb_png(video.frames[t], (img_dir / (video.frame_names[t] + ".png")).string());
    if (video.has_mask(static_cast<int>(t)))
      img::save_label_png(video.masks[t], (ann_dir / (video.frame_names[t] + ".png")).string());
    if (t < video.flow_fwd.size() && video.flow_fwd[t])
      flow::write_flo(*video.flow_fwd[t],
                      (flow_dir / (video.frame_names[t] + "_fwd.flo")).string());
    if (t < video.flow_bwd.size() && video.flow_bwd[t])
      flow::write_flo(*video.flow_bwd[t],
                      (flow_dir / (video.frame_names[t] + "_bwd.flo")).string());
  }

  const fs::path manifest = base / "manifest.json";
  json doc;
  doc["schema"] = 1;
  doc["sequences"] = json::array();
  if (fs::exists(manifest)) {
    std::ifstream mf(manifest);
    json prev = json::parse(mf, nullptr, false);
    if (!prev.is_discarded() && prev.contains("sequences")) doc = prev;
  }
  json entry;
  entry["name"] = video.name;
  entry["frames"] = video.frames.size();
  entry["objects"] = video.n_objects;
  entry["outlier"] = video.outlier_scene;
  auto& list = doc["sequences"];
  list.erase(std::remove_if(list.begin(), list.end(),
                            [&](const json& e) {
                              return e.is_object() && e.value("name", "") == video.name;
                            }),
             list.end());
  list.push_back(entry);
  std::ofstream mf(manifest, std::ios::trunc);
  mf << doc.dump(2) << "\n";
}

void save_predictions(const std::vector<img::LabelMask>& masks,
                      const std::vector<std::string>& frame_names, const std::string& out_dir) {
  if (masks.size() != frame_names.size())
    throw std::invalid_argument("save_predictions: mask/name count mismatch");
  fs::create_directories(out_dir);
  for (size_t i = 0; i < masks.size(); ++i)
    img::save_label_png(masks[i], (fs::path(out_dir) / (frame_names[i] + ".png")).string());
}

std::vector<img::LabelMask> load_predictions(const std::string& dir) {
  std::vector<img::LabelMask> out;
  for (const auto& p : sorted_images(dir)) out.push_back(img::load_label_png(p.string()));
  if (out.empty()) throw std::runtime_error("no prediction masks under " + dir);
  return out;
}

}  // namespace rvos::data
