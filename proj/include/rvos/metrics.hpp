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
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rvos/image.hpp"

namespace rvos::metrics {

struct MetricsConfig {
  double recall_threshold = 0.5;
  double contour_tolerance_frac = 0.008;  // of the image diagonal, in px
  int sc_angular_bins = 12;
  int sc_radial_bins = 5;
  int contour_samples = 100;
};

/// |pred & gt| / |pred | gt|; 1 when both masks are empty, 0 when exactly
/// one is.
double iou(const img::BinMask& pred, const img::BinMask& gt);

struct PRF {
  double precision = 0, recall = 0, f = 0;
};

/// Contour accuracy: maximum bipartite matching between the two contour
/// point sets, points matchable within the pixel tolerance. F = 2PR/(P+R).
PRF f_measure(const img::BinMask& pred, const img::BinMask& gt, const MetricsConfig& cfg);

struct SeriesAggregate {
  double mean = 0, recall = 0, decay = 0;
};

/// M = mean, O = fraction above the recall threshold, D = mean of the first
/// temporal quartile minus mean of the last (remainder frames round-robin
/// from the first quartile).
SeriesAggregate aggregate(const std::vector<double>& values, const MetricsConfig& cfg);

/// Mean shape-context dissimilarity between adjacent frames' contours:
/// uniform arc-length samples along traced boundaries, log-polar histograms
/// normalized by mean pairwise distance, optimal assignment under the
/// chi-square cost. An empty contour scores its pairs at the maximum cost.
double temporal_stability(const std::vector<img::BinMask>& masks, const MetricsConfig& cfg);

/// Ordered boundary loops (Moore trace) of each 4-connected component.
std::vector<std::vector<std::pair<int, int>>> trace_boundaries(const img::BinMask& mask);

struct ObjectReport {
  std::string sequence;
  int object_id = 0;
  std::vector<double> j_series, f_series;
  SeriesAggregate j, f;
  double t = 0;
};

struct MetricsReport {
  std::vector<ObjectReport> rows;
  SeriesAggregate j_overall, f_overall;
  double t_overall = 0;
};

/// Per-object evaluation of one sequence. Frame 0 carries the given ground
/// truth, so series cover t = 1..T-1.
std::vector<ObjectReport> evaluate_video(const std::string& name,
                                         const std::vector<img::LabelMask>& pred,
                                         const std::vector<img::LabelMask>& gt, int n_objects,
                                         const MetricsConfig& cfg);

MetricsReport combine(std::vector<ObjectReport> rows);

nlohmann::json report_json(const MetricsReport& report);
std::string report_table(const MetricsReport& report);

}  // namespace rvos::metrics
