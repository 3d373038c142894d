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

#include "rvos/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rvos/vision_ops.hpp"

namespace rvos::metrics {

using img::BinMask;

double iou(const BinMask& pred, const BinMask& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("iou: mask dimensions differ");
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.fg.size(); ++i) {
    const bool a = pred.fg[i] != 0, b = gt.fg[i] != 0;
    inter += (a && b) ? 1 : 0;
    uni += (a || b) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

std::vector<std::pair<int, int>> contour_points(const BinMask& mask) {
  const BinMask c = vision::contour_extract(mask);
  std::vector<std::pair<int, int>> pts;
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x)
      if (c.at(y, x)) pts.emplace_back(x, y);
  return pts;
}

// Hopcroft-Karp maximum matching. adj maps left vertices to right vertices.
int max_bipartite_matching(const std::vector<std::vector<int>>& adj, int n_right) {
  const int n_left = static_cast<int>(adj.size());
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> match_l(n_left, -1), match_r(n_right, -1), dist(n_left);

  auto bfs = [&]() {
    std::deque<int> q;
    for (int u = 0; u < n_left; ++u) {
      if (match_l[u] < 0) {
        dist[u] = 0;
        q.push_back(u);
      } else {
        dist[u] = kInf;
      }
    }
    bool found = false;
    while (!q.empty()) {
      const int u = q.front();
      q.pop_front();
      for (int v : adj[static_cast<size_t>(u)]) {
        const int w = match_r[static_cast<size_t>(v)];
        if (w < 0) {
          found = true;
        } else if (dist[static_cast<size_t>(w)] == kInf) {
          dist[static_cast<size_t>(w)] = dist[static_cast<size_t>(u)] + 1;
          q.push_back(w);
        }
      }
    }
    return found;
  };

  std::function<bool(int)> dfs = [&](int u) {
    for (int v : adj[static_cast<size_t>(u)]) {
      const int w = match_r[static_cast<size_t>(v)];
      if (w < 0 || (dist[static_cast<size_t>(w)] == dist[static_cast<size_t>(u)] + 1 && dfs(w))) {
        match_l[static_cast<size_t>(u)] = v;
        match_r[static_cast<size_t>(v)] = u;
        return true;
      }
    }
    dist[static_cast<size_t>(u)] = std::numeric_limits<int>::max();
    return false;
  };

  int matched = 0;
  while (bfs())
    for (int u = 0; u < n_left; ++u)
      if (match_l[u] < 0 && dfs(u)) ++matched;
  return matched;
}

}  // namespace

PRF f_measure(const BinMask& pred, const BinMask& gt, const MetricsConfig& cfg) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw std::invalid_argument("f_measure: mask dimensions differ");
  const auto cp = contour_points(pred);
  const auto cg = contour_points(gt);
  if (cp.empty() && cg.empty()) return {1.0, 1.0, 1.0};
  if (cp.empty() || cg.empty()) return {0.0, 0.0, 0.0};

  const double diag = std::sqrt(static_cast<double>(pred.width) * pred.width +
                                static_cast<double>(pred.height) * pred.height);
  const double tol = cfg.contour_tolerance_frac * diag;
  const double tol2 = tol * tol;

  // grid buckets over gt points keep the candidate scan local
  const int cell = std::max(1, static_cast<int>(std::ceil(tol)));
  const int gw = pred.width / cell + 2, gh = pred.height / cell + 2;
  std::vector<std::vector<int>> buckets(static_cast<size_t>(gw) * gh);
  for (size_t i = 0; i < cg.size(); ++i)
    buckets[static_cast<size_t>(cg[i].second / cell) * gw + cg[i].first / cell].push_back(
        static_cast<int>(i));

  std::vector<std::vector<int>> adj(cp.size());
  for (size_t i = 0; i < cp.size(); ++i) {
    const int bx = cp[i].first / cell, by = cp[i].second / cell;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int cx = bx + dx, cy = by + dy;
        if (cx < 0 || cx >= gw || cy < 0 || cy >= gh) continue;
        for (int j : buckets[static_cast<size_t>(cy) * gw + cx]) {
          const double ddx = cp[i].first - cg[static_cast<size_t>(j)].first;
          const double ddy = cp[i].second - cg[static_cast<size_t>(j)].second;
          if (ddx * ddx + ddy * ddy <= tol2) adj[i].push_back(j);
        }
      }
  }

  const int matched = max_bipartite_matching(adj, static_cast<int>(cg.size()));
  PRF out;
  out.precision = static_cast<double>(matched) / static_cast<double>(cp.size());
  out.recall = static_cast<double>(matched) / static_cast<double>(cg.size());
  out.f = (out.precision + out.recall) > 0.0
              ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
              : 0.0;
  return out;
}

SeriesAggregate aggregate(const std::vector<double>& values, const MetricsConfig& cfg) {
  if (values.empty()) throw std::invalid_argument("aggregate: empty series");
  SeriesAggregate out;
  double sum = 0;
  int64_t above = 0;
  for (double v : values) {
    sum += v;
    above += v > cfg.recall_threshold ? 1 : 0;
  }
  out.mean = sum / static_cast<double>(values.size());
  out.recall = static_cast<double>(above) / static_cast<double>(values.size());

  const int n = static_cast<int>(values.size());
  if (n < 4) {
    out.decay = values.front() - values.back();
    return out;
  }
  const int base = n / 4, rem = n % 4;
  int idx = 0;
  double q_mean[4] = {0, 0, 0, 0};
  for (int q = 0; q < 4; ++q) {
    const int len = base + (q < rem ? 1 : 0);
    double s = 0;
    for (int k = 0; k < len; ++k) s += values[static_cast<size_t>(idx++)];
    q_mean[q] = s / len;
  }
  out.decay = q_mean[0] - q_mean[3];
  return out;
}

std::vector<std::vector<std::pair<int, int>>> trace_boundaries(const BinMask& mask) {
  int n_comp = 0;
  const auto labels = vision::connected_components(mask, n_comp);
  std::vector<std::vector<std::pair<int, int>>> loops;
  std::vector<int64_t> start_of(static_cast<size_t>(n_comp) + 1, -1);
  for (int64_t i = 0; i < static_cast<int64_t>(labels.size()); ++i)
    if (labels[static_cast<size_t>(i)] > 0 && start_of[static_cast<size_t>(labels[static_cast<size_t>(i)])] < 0)
      start_of[static_cast<size_t>(labels[static_cast<size_t>(i)])] = i;

  const int w = mask.width, h = mask.height;
  auto fg = [&](int x, int y) {
    return x >= 0 && x < w && y >= 0 && y < h && mask.at(y, x) != 0;
  };
  // clockwise Moore neighborhood starting west
  static const int mx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  static const int my[8] = {0, -1, -1, -1, 0, 1, 1, 1};

  for (int comp = 1; comp <= n_comp; ++comp) {
    const int64_t s = start_of[static_cast<size_t>(comp)];
    const int sx = static_cast<int>(s % w), sy = static_cast<int>(s / w);
    std::vector<std::pair<int, int>> loop{{sx, sy}};
    int cx = sx, cy = sy;
    int backtrack = 0;  // came from west of the raster-first pixel
    int guard = 4 * w * h;
    while (guard-- > 0) {
      int k = 0;
      int nx = -1, ny = -1, ndir = -1;
      for (; k < 8; ++k) {
        const int dir = (backtrack + 1 + k) % 8;
        const int tx = cx + mx[dir], ty = cy + my[dir];
        if (fg(tx, ty)) {
          nx = tx;
          ny = ty;
          ndir = dir;
          break;
        }
      }
      if (ndir < 0) break;  // isolated pixel
      cx = nx;
      cy = ny;
      backtrack = (ndir + 4) % 8;
      if (cx == sx && cy == sy) break;
      loop.emplace_back(cx, cy);
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

namespace {

// Sampled contour point split into an integer loop anchor plus an offset.
// Differences are computed anchor-minus-anchor and offset-minus-offset, so
// rigid integer translations cancel exactly and the descriptors match
// bitwise.
struct ContourPoint {
  double anchor_x, anchor_y;  // integer-valued
  double off_x, off_y;
};

std::vector<ContourPoint> sample_contour(const BinMask& mask, int n_samples) {
  const auto loops = trace_boundaries(mask);
  if (loops.empty()) return {};

  struct Seg {
    double ax, ay;          // loop anchor
    double x0, y0, x1, y1;  // anchor-relative endpoints
    double len;
  };
  std::vector<Seg> segs;
  double total = 0;
  for (const auto& loop : loops) {
    const double ax = loop[0].first, ay = loop[0].second;
    if (loop.size() == 1) {
      segs.push_back({ax, ay, 0, 0, 0, 0, 1e-9});
      total += 1e-9;
      continue;
    }
    for (size_t i = 0; i < loop.size(); ++i) {
      const auto& a = loop[i];
      const auto& b = loop[(i + 1) % loop.size()];
      const double len = std::hypot(static_cast<double>(b.first - a.first),
                                    static_cast<double>(b.second - a.second));
      segs.push_back({ax, ay, static_cast<double>(a.first - loop[0].first),
                      static_cast<double>(a.second - loop[0].second),
                      static_cast<double>(b.first - loop[0].first),
                      static_cast<double>(b.second - loop[0].second), std::max(len, 1e-9)});
      total += std::max(len, 1e-9);
    }
  }

  std::vector<ContourPoint> pts;
  pts.reserve(static_cast<size_t>(n_samples));
  size_t si = 0;
  double consumed = 0;
  for (int k = 0; k < n_samples; ++k) {
    const double target = total * k / n_samples;
    while (si + 1 < segs.size() && consumed + segs[si].len < target) consumed += segs[si++].len;
    const Seg& s = segs[si];
    const double f = std::clamp((target - consumed) / s.len, 0.0, 1.0);
    pts.push_back({s.ax, s.ay, s.x0 + f * (s.x1 - s.x0), s.y0 + f * (s.y1 - s.y0)});
  }
  return pts;
}

std::pair<double, double> point_delta(const ContourPoint& a, const ContourPoint& b) {
  return {(b.anchor_x - a.anchor_x) + (b.off_x - a.off_x),
          (b.anchor_y - a.anchor_y) + (b.off_y - a.off_y)};
}

std::vector<std::vector<double>> shape_contexts(const std::vector<ContourPoint>& pts,
                                                const MetricsConfig& cfg) {
  const size_t n = pts.size();
  double mean_dist = 0;
  int64_t pairs = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) {
      const auto [dx, dy] = point_delta(pts[i], pts[j]);
      mean_dist += std::hypot(dx, dy);
      ++pairs;
    }
  mean_dist = pairs ? mean_dist / pairs : 1.0;
  if (mean_dist <= 0) mean_dist = 1.0;

  const int nr = cfg.sc_radial_bins, na = cfg.sc_angular_bins;
  const double r_lo = 0.125, r_hi = 2.0;
  const double log_lo = std::log(r_lo), log_hi = std::log(r_hi);

  std::vector<std::vector<double>> hists(n, std::vector<double>(static_cast<size_t>(nr) * na, 0.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto [dx, dy] = point_delta(pts[i], pts[j]);
      const double r = std::hypot(dx, dy) / mean_dist;
      int rb;
      if (r <= r_lo) {
        rb = 0;
      } else if (r >= r_hi) {
        rb = nr - 1;
      } else {
        rb = static_cast<int>((std::log(r) - log_lo) / (log_hi - log_lo) * nr);
        rb = std::clamp(rb, 0, nr - 1);
      }
      double th = std::atan2(dy, dx);  // [-pi, pi]
      int ab = static_cast<int>((th + 3.14159265358979323846) / (2 * 3.14159265358979323846) * na);
      ab = std::clamp(ab, 0, na - 1);
      hists[i][static_cast<size_t>(rb) * na + ab] += 1.0;
    }
    for (auto& v : hists[i]) v /= static_cast<double>(n - 1);
  }
  return hists;
}

double chi2(const std::vector<double>& a, const std::vector<double>& b) {
  double c = 0;
  for (size_t k = 0; k < a.size(); ++k) {
    const double s = a[k] + b[k];
    if (s > 0) c += (a[k] - b[k]) * (a[k] - b[k]) / s;
  }
  return 0.5 * c;
}

// O(n^3) Hungarian algorithm over a square cost matrix; returns total cost.
double hungarian(const std::vector<std::vector<double>>& cost) {
  const int n = static_cast<int>(cost.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<size_t>(n) + 1, 0), v(static_cast<size_t>(n) + 1, 0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                           u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  double total = 0;
  for (int j = 1; j <= n; ++j)
    if (p[static_cast<size_t>(j)] > 0)
      total += cost[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)][static_cast<size_t>(j - 1)];
  return total;
}

}  // namespace

double temporal_stability(const std::vector<BinMask>& masks, const MetricsConfig& cfg) {
  if (masks.size() < 2)
    throw std::invalid_argument("temporal_stability: needs at least 2 frames");

  std::vector<std::vector<std::vector<double>>> descs;
  std::vector<bool> empty;
  for (const auto& m : masks) {
    const auto pts = sample_contour(m, cfg.contour_samples);
    empty.push_back(pts.empty());
    descs.push_back(pts.empty() ? std::vector<std::vector<double>>{} : shape_contexts(pts, cfg));
  }

  double total = 0;
  int pairs = 0;
  for (size_t t = 0; t + 1 < masks.size(); ++t) {
    ++pairs;
    if (empty[t] || empty[t + 1]) {
      total += 1.0;  // maximum chi-square cost
      continue;
    }
    const auto& a = descs[t];
    const auto& b = descs[t + 1];
    std::vector<std::vector<double>> cost(a.size(), std::vector<double>(b.size(), 0.0));
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = 0; j < b.size(); ++j) cost[i][j] = chi2(a[i], b[j]);
    total += hungarian(cost) / static_cast<double>(a.size());
  }
  return total / pairs;
}

std::vector<ObjectReport> evaluate_video(const std::string& name,
                                         const std::vector<img::LabelMask>& pred,
                                         const std::vector<img::LabelMask>& gt, int n_objects,
                                         const MetricsConfig& cfg) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("evaluate_video: frame count mismatch for " + name);
  if (pred.size() < 2)
    throw std::invalid_argument("evaluate_video: needs at least 2 frames");

  std::vector<ObjectReport> rows;
  for (int obj = 1; obj <= n_objects; ++obj) {
    ObjectReport row;
    row.sequence = name;
    row.object_id = obj;
    std::vector<BinMask> pred_series;
    for (size_t t = 1; t < pred.size(); ++t) {
      const BinMask pm = img::mask_for_label(pred[t], obj);
      const BinMask gm = img::mask_for_label(gt[t], obj);
      row.j_series.push_back(iou(pm, gm));
      row.f_series.push_back(f_measure(pm, gm, cfg).f);
      pred_series.push_back(pm);
    }
    row.j = aggregate(row.j_series, cfg);
    row.f = aggregate(row.f_series, cfg);
    row.t = pred_series.size() >= 2 ? temporal_stability(pred_series, cfg) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

MetricsReport combine(std::vector<ObjectReport> rows) {
  MetricsReport rep;
  rep.rows = std::move(rows);
  if (rep.rows.empty()) return rep;
  for (const auto& r : rep.rows) {
    rep.j_overall.mean += r.j.mean;
    rep.j_overall.recall += r.j.recall;
    rep.j_overall.decay += r.j.decay;
    rep.f_overall.mean += r.f.mean;
    rep.f_overall.recall += r.f.recall;
    rep.f_overall.decay += r.f.decay;
    rep.t_overall += r.t;
  }
  const double n = static_cast<double>(rep.rows.size());
  rep.j_overall.mean /= n;
  rep.j_overall.recall /= n;
  rep.j_overall.decay /= n;
  rep.f_overall.mean /= n;
  rep.f_overall.recall /= n;
  rep.f_overall.decay /= n;
  rep.t_overall /= n;
  return rep;
}

nlohmann::json report_json(const MetricsReport& report) {
  nlohmann::json doc;
  doc["schema"] = 1;
  doc["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    nlohmann::json e;
    e["sequence"] = r.sequence;
    e["object"] = r.object_id;
    e["J"] = {{"mean", r.j.mean}, {"recall", r.j.recall}, {"decay", r.j.decay}};
    e["F"] = {{"mean", r.f.mean}, {"recall", r.f.recall}, {"decay", r.f.decay}};
    e["T"] = r.t;
    e["J_series"] = r.j_series;
    e["F_series"] = r.f_series;
    doc["rows"].push_back(e);
  }
  doc["overall"]["J"] = {{"mean", report.j_overall.mean},
                         {"recall", report.j_overall.recall},
                         {"decay", report.j_overall.decay}};
  doc["overall"]["F"] = {{"mean", report.f_overall.mean},
                         {"recall", report.f_overall.recall},
                         {"decay", report.f_overall.decay}};
  doc["overall"]["T"] = report.t_overall;
  return doc;
}

std::string report_table(const MetricsReport& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %3s | %7s %7s %7s | %7s %7s %7s | %7s\n", "sequence",
                "obj", "J-mean", "J-rec", "J-dec", "F-mean", "F-rec", "F-dec", "T-mean");
  os << line;
  os << std::string(92, '-') << "\n";
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line,
                  "%-20s %3d | %7.3f %7.3f %7.3f | %7.3f %7.3f %7.3f | %7.3f\n",
                  r.sequence.c_str(), r.object_id, r.j.mean, r.j.recall, r.j.decay, r.f.mean,
                  r.f.recall, r.f.decay, r.t);
    os << line;
  }
  os << std::string(92, '-') << "\n";
  std::snprintf(line, sizeof line, "%-20s %3s | %7.3f %7.3f %7.3f | %7.3f %7.3f %7.3f | %7.3f\n",
                "overall", "", report.j_overall.mean, report.j_overall.recall,
                report.j_overall.decay, report.f_overall.mean, report.f_overall.recall,
                report.f_overall.decay, report.t_overall);
  os << line;
  return os.str();
}

}  // namespace rvos::metrics
