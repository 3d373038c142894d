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

#include "rvos/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rvos::config {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

RunConfig from_json(const json& doc) {
  RunConfig cfg;
  check_keys(doc, {"seed", "threads", "seg", "loc", "fusion", "flow", "train", "toggles",
                   "metrics"},
             "top level");
  uint32_t seed = cfg.pipe.train.seed;
  take(doc, "seed", seed);
  cfg.pipe.train.seed = seed;
  take(doc, "threads", cfg.threads);

  if (doc.contains("seg")) {
    const json& s = doc["seg"];
    check_keys(s, {"stages", "appearance_channels", "flow_channels", "flow_magnitude_scale"},
               "seg");
    if (s.contains("stages")) {
      cfg.pipe.seg.stages.clear();
      for (const auto& st : s["stages"]) {
        if (!st.is_array() || st.size() != 2)
          throw std::invalid_argument("config: seg.stages entries must be [convs, width]");
        cfg.pipe.seg.stages.push_back({st[0].get<int>(), st[1].get<int>()});
      }
    }
    take(s, "appearance_channels", cfg.pipe.seg.appearance_channels);
    take(s, "flow_channels", cfg.pipe.seg.flow_channels);
    take(s, "flow_magnitude_scale", cfg.pipe.seg.flow_magnitude_scale);
  }

  if (doc.contains("loc")) {
    const json& l = doc["loc"];
    check_keys(l,
               {"roi_grid", "proposal_threshold", "min_proposal_area", "enlarge_factor",
                "fc_width", "lost_enlarge_factor"},
               "loc");
    take(l, "roi_grid", cfg.pipe.loc.roi_grid);
    take(l, "proposal_threshold", cfg.pipe.loc.proposal_threshold);
    take(l, "min_proposal_area", cfg.pipe.loc.min_proposal_area);
    take(l, "enlarge_factor", cfg.pipe.loc.enlarge_factor);
    take(l, "fc_width", cfg.pipe.loc.fc_width);
    take(l, "lost_enlarge_factor", cfg.pipe.loc.lost_enlarge_factor);
  }

  if (doc.contains("fusion")) {
    check_keys(doc["fusion"], {"tau"}, "fusion");
    take(doc["fusion"], "tau", cfg.pipe.fuse.tau);
  }

  if (doc.contains("flow")) {
    const json& f = doc["flow"];
    check_keys(f, {"alpha", "iterations", "levels", "warps", "allow_estimation"}, "flow");
    take(f, "alpha", cfg.pipe.flow_params.alpha);
    take(f, "iterations", cfg.pipe.flow_params.iterations);
    take(f, "levels", cfg.pipe.flow_params.levels);
    take(f, "warps", cfg.pipe.flow_params.warps);
    take(f, "allow_estimation", cfg.pipe.allow_flow_estimation);
  }

  if (doc.contains("train")) {
    const json& t = doc["train"];
    check_keys(t,
               {"epochs", "window", "base_lr", "epoch_decay", "online_iterations", "online_lr",
                "lambda_bbox", "augment", "windows_per_video"},
               "train");
    take(t, "epochs", cfg.pipe.train.epochs);
    take(t, "window", cfg.pipe.train.window);
    take(t, "base_lr", cfg.pipe.train.base_lr);
    take(t, "epoch_decay", cfg.pipe.train.epoch_decay);
    take(t, "online_iterations", cfg.pipe.train.online_iterations);
    take(t, "online_lr", cfg.pipe.train.online_lr);
    take(t, "lambda_bbox", cfg.pipe.train.lambda_bbox);
    take(t, "augment", cfg.pipe.train.augment);
    take(t, "windows_per_video", cfg.pipe.train.windows_per_video);
  }

  if (doc.contains("toggles")) {
    const json& t = doc["toggles"];
    check_keys(t, {"flow_stream", "warp_mask", "train_loc", "apply_loc", "recurrent"}, "toggles");
    take(t, "flow_stream", cfg.pipe.toggles.flow_stream);
    take(t, "warp_mask", cfg.pipe.toggles.warp_mask);
    take(t, "train_loc", cfg.pipe.toggles.train_loc);
    take(t, "apply_loc", cfg.pipe.toggles.apply_loc);
    take(t, "recurrent", cfg.pipe.toggles.recurrent);
  }

  if (doc.contains("metrics")) {
    const json& m = doc["metrics"];
    check_keys(m,
               {"recall_threshold", "contour_tolerance_frac", "angular_bins", "radial_bins",
                "contour_samples"},
               "metrics");
    take(m, "recall_threshold", cfg.metrics.recall_threshold);
    take(m, "contour_tolerance_frac", cfg.metrics.contour_tolerance_frac);
    take(m, "angular_bins", cfg.metrics.sc_angular_bins);
    take(m, "radial_bins", cfg.metrics.sc_radial_bins);
    take(m, "contour_samples", cfg.metrics.contour_samples);
  }
  return cfg;
}

RunConfig load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  json doc = json::parse(f);
  return from_json(doc);
}

json to_json(const RunConfig& cfg) {
  json doc;
  doc["seed"] = cfg.pipe.train.seed;
  doc["threads"] = cfg.threads;
  json stages = json::array();
  for (const auto& s : cfg.pipe.seg.stages) stages.push_back({s.convs, s.width});
  doc["seg"] = {{"stages", stages},
                {"appearance_channels", cfg.pipe.seg.appearance_channels},
                {"flow_channels", cfg.pipe.seg.flow_channels},
                {"flow_magnitude_scale", cfg.pipe.seg.flow_magnitude_scale}};
  doc["loc"] = {{"roi_grid", cfg.pipe.loc.roi_grid},
                {"proposal_threshold", cfg.pipe.loc.proposal_threshold},
                {"min_proposal_area", cfg.pipe.loc.min_proposal_area},
                {"enlarge_factor", cfg.pipe.loc.enlarge_factor},
                {"fc_width", cfg.pipe.loc.fc_width},
                {"lost_enlarge_factor", cfg.pipe.loc.lost_enlarge_factor}};
  doc["fusion"] = {{"tau", cfg.pipe.fuse.tau}};
  doc["flow"] = {{"alpha", cfg.pipe.flow_params.alpha},
                 {"iterations", cfg.pipe.flow_params.iterations},
                 {"levels", cfg.pipe.flow_params.levels},
                 {"warps", cfg.pipe.flow_params.warps},
                 {"allow_estimation", cfg.pipe.allow_flow_estimation}};
  doc["train"] = {{"epochs", cfg.pipe.train.epochs},
                  {"window", cfg.pipe.train.window},
                  {"base_lr", cfg.pipe.train.base_lr},
                  {"epoch_decay", cfg.pipe.train.epoch_decay},
                  {"online_iterations", cfg.pipe.train.online_iterations},
                  {"online_lr", cfg.pipe.train.online_lr},
                  {"lambda_bbox", cfg.pipe.train.lambda_bbox},
                  {"augment", cfg.pipe.train.augment},
                  {"windows_per_video", cfg.pipe.train.windows_per_video}};
  doc["toggles"] = {{"flow_stream", cfg.pipe.toggles.flow_stream},
                    {"warp_mask", cfg.pipe.toggles.warp_mask},
                    {"train_loc", cfg.pipe.toggles.train_loc},
                    {"apply_loc", cfg.pipe.toggles.apply_loc},
                    {"recurrent", cfg.pipe.toggles.recurrent}};
  doc["metrics"] = {{"recall_threshold", cfg.metrics.recall_threshold},
                    {"contour_tolerance_frac", cfg.metrics.contour_tolerance_frac},
                    {"angular_bins", cfg.metrics.sc_angular_bins},
                    {"radial_bins", cfg.metrics.sc_radial_bins},
                    {"contour_samples", cfg.metrics.contour_samples}};
  return doc;
}

}  // namespace rvos::config
