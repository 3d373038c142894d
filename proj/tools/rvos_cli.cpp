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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rvos/config.hpp"
#include "rvos/dataset.hpp"
#include "rvos/flow.hpp"
#include "rvos/metrics.hpp"
#include "rvos/parallel.hpp"
#include "rvos/pipeline.hpp"
#include "rvos/synth.hpp"
#include "rvos/vision_ops.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using rvos::config::RunConfig;

namespace {

struct CommonOpts {
  std::string config_path;
  int threads = 0;
  int64_t seed = -1;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : rvos::config::load(opts.config_path);
  if (opts.seed >= 0) cfg.pipe.train.seed = static_cast<uint32_t>(opts.seed);
  if (opts.threads > 0) cfg.threads = opts.threads;
  if (cfg.threads > 0) rvos::set_worker_threads(cfg.threads);
  return cfg;
}

void write_manifest(const std::string& path, const RunConfig& cfg, const std::string& command,
                    json extra) {
  json doc;
  doc["schema"] = 1;
  doc["command"] = command;
  doc["config"] = rvos::config::to_json(cfg);
  doc["seed"] = cfg.pipe.train.seed;
  for (auto& [k, v] : extra.items()) doc[k] = v;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest: " + path);
  f << doc.dump(2) << "\n";
}

void log_epochs(const std::string& stage, const std::vector<rvos::pipeline::EpochStats>& stats) {
  for (size_t e = 0; e < stats.size(); ++e)
    std::cout << "stage=" << stage << " epoch=" << e << " mean_loss=" << stats[e].mean_loss
              << " samples=" << stats[e].samples << "\n";
}

json epochs_json(const std::vector<rvos::pipeline::EpochStats>& stats) {
  json arr = json::array();
  for (const auto& s : stats) arr.push_back({{"mean_loss", s.mean_loss}, {"samples", s.samples}});
  return arr;
}

std::string pick_sequence(const std::string& root, std::string requested) {
  if (!requested.empty()) return requested;
  const fs::path imgs = fs::path(root) / "JPEGImages";
  std::vector<std::string> seqs;
  if (fs::is_directory(imgs))
    for (const auto& e : fs::directory_iterator(imgs))
      if (e.is_directory()) seqs.push_back(e.path().filename().string());
  if (seqs.size() != 1)
    throw std::runtime_error("expected exactly one sequence under " + root +
                             " (or pass --seq); found " + std::to_string(seqs.size()));
  return seqs[0];
}

int cmd_synth(const CommonOpts& common, const std::string& out_dir, const std::string& suite) {
  const RunConfig cfg = resolve_config(common);
  const uint32_t seed = cfg.pipe.train.seed;
  std::vector<rvos::synth::SynthScene> train, test;
  if (suite == "default") {
    train = rvos::synth::training_suite(seed);
    test = rvos::synth::heldout_suite(seed);
  } else if (suite == "small") {
    train = rvos::synth::small_training_suite(seed);
    test = rvos::synth::small_heldout_suite(seed);
  } else {
    throw std::invalid_argument("unknown suite \"" + suite + "\" (default|small)");
  }
  for (const auto& s : train)
    rvos::data::save_video(rvos::synth::generate(s, seed), (fs::path(out_dir) / "train").string());
  for (const auto& s : test)
    rvos::data::save_video(rvos::synth::generate(s, seed), (fs::path(out_dir) / "test").string());
  write_manifest((fs::path(out_dir) / "synth.manifest.json").string(), cfg, "synth",
                 {{"suite", suite},
                  {"train_videos", train.size()},
                  {"test_videos", test.size()},
                  {"out", out_dir}});
  std::cout << "synth=done out=" << out_dir << " train=" << train.size()
            << " test=" << test.size() << "\n";
  return 0;
}

int cmd_train(const CommonOpts& common, const std::string& stage, const std::string& data_dir,
              const std::string& out_path, const std::string& in_ckpt) {
  if (stage != "static" && stage != "recurrent")
    throw std::invalid_argument("unknown stage \"" + stage + "\" (static|recurrent)");
  if (stage == "recurrent" && in_ckpt.empty())
    throw std::invalid_argument("train --stage recurrent requires --ckpt (static checkpoint)");
  const RunConfig cfg = resolve_config(common);
  const auto videos = rvos::data::load_davis(data_dir);
  const auto start = std::chrono::steady_clock::now();

  rvos::pipeline::Engine engine =
      in_ckpt.empty() ? rvos::pipeline::Engine::create(cfg.pipe)
                      : rvos::pipeline::Engine(cfg.pipe, rvos::ad::load_checkpoint(in_ckpt));
  std::vector<rvos::pipeline::EpochStats> stats;
  if (stage == "static") {
    stats = engine.train_static(videos);
  } else {
    stats = engine.train_recurrent(videos);
  }
  log_epochs(stage, stats);
  rvos::ad::save_checkpoint(engine.params(), out_path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(out_path + ".manifest.json", cfg, "train",
                 {{"stage", stage},
                  {"data", data_dir},
                  {"checkpoint", out_path},
                  {"input_checkpoint", in_ckpt},
                  {"epochs", epochs_json(stats)},
                  {"wall_seconds", secs}});
  std::cout << "train=done stage=" << stage << " ckpt=" << out_path << " seconds=" << secs
            << "\n";
  return 0;
}

int cmd_finetune(const CommonOpts& common, const std::string& video_root, std::string seq,
                 const std::string& in_ckpt, const std::string& out_path) {
  const RunConfig cfg = resolve_config(common);
  seq = pick_sequence(video_root, seq);
  const auto video = rvos::data::load_sequence(video_root, seq);
  const auto start = std::chrono::steady_clock::now();
  rvos::pipeline::Engine engine(cfg.pipe, rvos::ad::load_checkpoint(in_ckpt));
  engine.online_finetune(video);
  rvos::ad::save_checkpoint(engine.params(), out_path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(out_path + ".manifest.json", cfg, "finetune",
                 {{"video", video_root},
                  {"sequence", seq},
                  {"input_checkpoint", in_ckpt},
                  {"checkpoint", out_path},
                  {"objects", video.n_objects},
                  {"wall_seconds", secs}});
  std::cout << "finetune=done seq=" << seq << " objects=" << video.n_objects
            << " ckpt=" << out_path << " seconds=" << secs << "\n";
  return 0;
}

json boxes_json(const rvos::pipeline::InferOutput& out,
                const std::vector<std::string>& frame_names) {
  json frames = json::array();
  for (size_t t = 0; t < out.boxes.size(); ++t) {
    json boxes = json::array();
    for (size_t i = 0; i < out.boxes[t].size(); ++i) {
      if (out.boxes[t][i]) {
        const auto& b = *out.boxes[t][i];
        boxes.push_back({{"object", i + 1},
                         {"x_min", b.x_min},
                         {"y_min", b.y_min},
                         {"x_max", b.x_max},
                         {"y_max", b.y_max}});
      } else {
        boxes.push_back({{"object", i + 1}, {"absent", true}});
      }
    }
    frames.push_back({{"frame", frame_names[t]}, {"boxes", boxes}});
  }
  return json{{"schema", 1}, {"frames", frames}};
}

int cmd_infer(const CommonOpts& common, const std::string& video_root, std::string seq,
              const std::string& in_ckpt, const std::string& out_dir) {
  const RunConfig cfg = resolve_config(common);
  seq = pick_sequence(video_root, seq);
  const auto video = rvos::data::load_sequence(video_root, seq);
  rvos::pipeline::Engine engine(cfg.pipe, rvos::ad::load_checkpoint(in_ckpt));
  const auto out = engine.infer(video);

  const fs::path seq_dir = fs::path(out_dir) / seq;
  rvos::data::save_predictions(out.masks, video.frame_names, seq_dir.string());
  {
    std::ofstream f(seq_dir / "boxes.json", std::ios::trunc);
    f << boxes_json(out, video.frame_names).dump(2) << "\n";
  }
  json timing = json::array();
  for (size_t t = 0; t < out.frame_seconds.size(); ++t)
    timing.push_back({{"frame", video.frame_names[t]}, {"seconds", out.frame_seconds[t]}});
  write_manifest((seq_dir / "manifest.json").string(), cfg, "infer",
                 {{"video", video_root},
                  {"sequence", seq},
                  {"input_checkpoint", in_ckpt},
                  {"frames", out.masks.size()},
                  {"frame_timing", timing}});
  std::cout << "infer=done seq=" << seq << " frames=" << out.masks.size() << " out=" << out_dir
            << "\n";
  return 0;
}

int cmd_eval(const CommonOpts& common, const std::string& pred_dir, const std::string& gt_root,
             const std::string& report_path) {
  const RunConfig cfg = resolve_config(common);
  const auto videos = rvos::data::load_davis(gt_root);
  std::vector<rvos::metrics::ObjectReport> rows;
  int evaluated = 0;
  for (const auto& v : videos) {
    const fs::path seq_pred = fs::path(pred_dir) / v.name;
    if (!fs::is_directory(seq_pred)) continue;
    const auto pred = rvos::data::load_predictions(seq_pred.string());
    if (static_cast<int>(pred.size()) != v.frame_count())
      throw std::runtime_error("prediction count mismatch for sequence " + v.name);
    for (int t = 0; t < v.frame_count(); ++t)
      if (!v.has_mask(t))
        throw std::runtime_error("ground truth missing at frame " + std::to_string(t) +
                                 " of sequence " + v.name);
    auto r = rvos::metrics::evaluate_video(v.name, pred, v.masks, v.n_objects, cfg.metrics);
    rows.insert(rows.end(), r.begin(), r.end());
    ++evaluated;
  }
  if (evaluated == 0)
    throw std::runtime_error("no predicted sequences found under " + pred_dir);
  const auto report = rvos::metrics::combine(std::move(rows));
  {
    std::ofstream f(report_path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write report: " + report_path);
    f << rvos::metrics::report_json(report).dump(2) << "\n";
  }
  std::cout << rvos::metrics::report_table(report);
  std::cout << "eval=done sequences=" << evaluated << " report=" << report_path << "\n";
  return 0;
}

int cmd_overlay(const CommonOpts& common, const std::string& video_root, std::string seq,
                const std::string& masks_dir, const std::string& out_dir) {
  resolve_config(common);
  seq = pick_sequence(video_root, seq);
  rvos::data::LoadOptions opts;
  opts.load_flows = false;
  opts.require_first_annotation = false;
  const auto video = rvos::data::load_sequence(video_root, seq, opts);
  const auto masks = rvos::data::load_predictions((fs::path(masks_dir) / seq).string());
  if (masks.size() != video.frames.size())
    throw std::runtime_error("mask count does not match frame count for " + seq);

  json boxes;
  {
    std::ifstream f(fs::path(masks_dir) / seq / "boxes.json");
    if (f) boxes = json::parse(f, nullptr, false);
  }

  fs::create_directories(fs::path(out_dir) / seq);
  for (size_t t = 0; t < masks.size(); ++t) {
    rvos::img::Frame canvas = video.frames[t];
    const int64_t plane = static_cast<int64_t>(canvas.width) * canvas.height;
    for (int64_t p = 0; p < plane; ++p) {
      const int label = masks[t].labels[static_cast<size_t>(p)];
      if (!label) continue;
      const auto color = rvos::img::instance_color(label);
      for (int c = 0; c < 3; ++c)
        canvas.rgb[c * plane + p] =
            0.55f * canvas.rgb[c * plane + p] + 0.45f * (color[c] / 255.0f);
    }
    if (boxes.is_object() && boxes.contains("frames") && t < boxes["frames"].size()) {
      for (const auto& b : boxes["frames"][t]["boxes"]) {
        if (b.value("absent", false)) continue;
        const int obj = b.value("object", 0);
        const auto color = rvos::img::instance_color(obj);
        const int x0 = std::max(0, static_cast<int>(b.value("x_min", 0.0f)));
        const int y0 = std::max(0, static_cast<int>(b.value("y_min", 0.0f)));
        const int x1 = std::min(canvas.width - 1, static_cast<int>(b.value("x_max", 0.0f)) - 1);
        const int y1 = std::min(canvas.height - 1, static_cast<int>(b.value("y_max", 0.0f)) - 1);
        for (int x = x0; x <= x1; ++x)
          for (int y : {y0, y1})
            if (y >= 0 && y < canvas.height)
              for (int c = 0; c < 3; ++c)
                canvas.rgb[c * plane + static_cast<int64_t>(y) * canvas.width + x] =
                    color[c] / 255.0f;
        for (int y = y0; y <= y1; ++y)
          for (int x : {x0, x1})
            if (x >= 0 && x < canvas.width)
              for (int c = 0; c < 3; ++c)
                canvas.rgb[c * plane + static_cast<int64_t>(y) * canvas.width + x] =
                    color[c] / 255.0f;
      }
    }
    rvos::img::save_rgb_png(canvas,
                            (fs::path(out_dir) / seq / (video.frame_names[t] + ".png")).string());
  }
  std::cout << "overlay=done seq=" << seq << " frames=" << masks.size() << " out=" << out_dir
            << "\n";
  return 0;
}

struct AblateRow {
  std::string name;
  rvos::pipeline::Toggles toggles;
};

AblateRow ablate_row(const std::string& name) {
  rvos::pipeline::Toggles t;
  t.flow_stream = t.warp_mask = t.train_loc = t.apply_loc = t.recurrent = false;
  if (name == "astream") return {name, t};
  t.flow_stream = true;
  if (name == "fstream") return {name, t};
  t.warp_mask = true;
  if (name == "warp") return {name, t};
  t.train_loc = true;
  if (name == "train") return {name, t};
  t.apply_loc = true;
  if (name == "apply") return {name, t};
  t.recurrent = true;
  if (name == "rnn") return {name, t};
  throw std::invalid_argument("unknown toggle row \"" + name +
                              "\" (astream|fstream|warp|train|apply|rnn)");
}

struct AblateResult {
  double mean_iou = 0;
  double outlier_iou = 0;
  int outlier_rows = 0;
};

AblateResult run_ablate_once(RunConfig cfg, const rvos::pipeline::Toggles& toggles,
                             uint32_t seed) {
  cfg.pipe.toggles = toggles;
  cfg.pipe.train.seed = seed;

  std::vector<rvos::data::VideoRecord> train, test;
  for (const auto& s : rvos::synth::small_training_suite(seed))
    train.push_back(rvos::synth::generate(s, seed));
  for (const auto& s : rvos::synth::small_heldout_suite(seed))
    test.push_back(rvos::synth::generate(s, seed));

  auto engine = rvos::pipeline::Engine::create(cfg.pipe);
  engine.train_static(train);
  if (toggles.recurrent) engine.train_recurrent(train);

  AblateResult res;
  double iou_sum = 0, outlier_sum = 0;
  int rows = 0, outlier_rows = 0;
  for (const auto& v : test) {
    engine.online_finetune(v);
    const auto out = engine.infer(v);
    for (int obj = 1; obj <= v.n_objects; ++obj) {
      double obj_sum = 0;
      int frames = 0;
      for (int t = 1; t < v.frame_count(); ++t) {
        obj_sum += rvos::metrics::iou(rvos::img::mask_for_label(out.masks[static_cast<size_t>(t)], obj),
                                      rvos::img::mask_for_label(v.masks[static_cast<size_t>(t)], obj));
        ++frames;
      }
      const double mean = obj_sum / frames;
      iou_sum += mean;
      ++rows;
      if (v.outlier_scene) {
        outlier_sum += mean;
        ++outlier_rows;
      }
    }
  }
  res.mean_iou = iou_sum / rows;
  res.outlier_iou = outlier_rows ? outlier_sum / outlier_rows : 0.0;
  res.outlier_rows = outlier_rows;
  return res;
}

int cmd_ablate(const CommonOpts& common, const std::string& toggles_list, int seeds,
               const std::string& out_dir) {
  RunConfig cfg = resolve_config(common);
  // ablation scale: the full schedule on the small suite
  cfg.pipe.train.epochs = std::min(cfg.pipe.train.epochs, 4);
  cfg.pipe.train.window = std::min(cfg.pipe.train.window, 4);
  cfg.pipe.train.online_iterations = std::min(cfg.pipe.train.online_iterations, 80);

  std::vector<AblateRow> rows;
  std::string item;
  std::istringstream ss(toggles_list);
  while (std::getline(ss, item, ',')) rows.push_back(ablate_row(item));
  if (rows.empty()) throw std::invalid_argument("ablate: empty toggle list");

  json report;
  report["schema"] = 1;
  report["rows"] = json::array();
  std::cout << "row        seed  mean_iou  outlier_iou\n";
  for (const auto& row : rows) {
    json seeds_json = json::array();
    for (int s = 0; s < seeds; ++s) {
      const uint32_t seed = cfg.pipe.train.seed + static_cast<uint32_t>(s);
      const AblateResult r = run_ablate_once(cfg, row.toggles, seed);
      seeds_json.push_back({{"seed", seed},
                            {"mean_iou", r.mean_iou},
                            {"outlier_iou", r.outlier_iou},
                            {"outlier_rows", r.outlier_rows}});
      char line[96];
      std::snprintf(line, sizeof line, "%-10s %4u   %7.4f      %7.4f\n", row.name.c_str(), seed,
                    r.mean_iou, r.outlier_iou);
      std::cout << line << std::flush;
    }
    report["rows"].push_back({{"name", row.name}, {"seeds", seeds_json}});
  }
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream f(fs::path(out_dir) / "ablate_report.json", std::ios::trunc);
    f << report.dump(2) << "\n";
    write_manifest((fs::path(out_dir) / "ablate.manifest.json").string(), cfg, "ablate",
                   {{"toggles", toggles_list}, {"seeds", seeds}});
  }
  std::cout << "ablate=done rows=" << rows.size() << " seeds=" << seeds << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent multi-object video segmentation pipeline"};
  app.require_subcommand(1);
  app.fallthrough(true);  // global flags may follow the subcommand

  CommonOpts common;
  app.add_option("--config", common.config_path, "JSON run configuration");
  app.add_option("--threads", common.threads, "worker thread cap (1 = fully sequential)");
  app.add_option("--seed", common.seed, "seed override");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out, synth_suite = "default";
  synth->add_option("--out", synth_out, "output root")->required();
  synth->add_option("--suite", synth_suite, "default|small");

  auto* train = app.add_subcommand("train", "offline training");
  std::string train_stage, train_data, train_out, train_in;
  train->add_option("--stage", train_stage, "static|recurrent")->required();
  train->add_option("--data", train_data, "dataset root")->required();
  train->add_option("--out", train_out, "output checkpoint path")->required();
  train->add_option("--ckpt", train_in, "input checkpoint (required for recurrent)");

  auto* finetune = app.add_subcommand("finetune", "first-frame online finetuning");
  std::string ft_video, ft_seq, ft_in, ft_out;
  finetune->add_option("--video", ft_video, "dataset root containing the sequence")->required();
  finetune->add_option("--seq", ft_seq, "sequence name (optional when unique)");
  finetune->add_option("--ckpt", ft_in, "input checkpoint")->required();
  finetune->add_option("--out", ft_out, "output checkpoint path")->required();

  auto* infer = app.add_subcommand("infer", "sequence inference");
  std::string inf_video, inf_seq, inf_in, inf_out;
  infer->add_option("--video", inf_video, "dataset root containing the sequence")->required();
  infer->add_option("--seq", inf_seq, "sequence name (optional when unique)");
  infer->add_option("--ckpt", inf_in, "checkpoint")->required();
  infer->add_option("--out", inf_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  std::string ev_pred, ev_gt, ev_report;
  eval->add_option("--pred", ev_pred, "prediction root (per-sequence subdirectories)")->required();
  eval->add_option("--gt", ev_gt, "ground-truth dataset root")->required();
  eval->add_option("--report", ev_report, "report JSON path")->required();

  auto* overlay = app.add_subcommand("overlay", "render tinted masks and boxes");
  std::string ov_video, ov_seq, ov_masks, ov_out;
  overlay->add_option("--video", ov_video, "dataset root containing the sequence")->required();
  overlay->add_option("--seq", ov_seq, "sequence name (optional when unique)");
  overlay->add_option("--masks", ov_masks, "mask root (per-sequence subdirectories)")->required();
  overlay->add_option("--out", ov_out, "output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "toggle-matrix comparison on the synthetic suite");
  std::string ab_toggles = "astream,fstream,warp,train,apply,rnn", ab_out;
  int ab_seeds = 1;
  ablate->add_option("--toggles", ab_toggles, "comma list: astream,fstream,warp,train,apply,rnn");
  ablate->add_option("--seeds", ab_seeds, "seeds per row");
  ablate->add_option("--out", ab_out, "report directory");

  try {
    app.parse(argc, argv);
    if (*synth) return cmd_synth(common, synth_out, synth_suite);
    if (*train) return cmd_train(common, train_stage, train_data, train_out, train_in);
    if (*finetune) return cmd_finetune(common, ft_video, ft_seq, ft_in, ft_out);
    if (*infer) return cmd_infer(common, inf_video, inf_seq, inf_in, inf_out);
    if (*eval) return cmd_eval(common, ev_pred, ev_gt, ev_report);
    if (*overlay) return cmd_overlay(common, ov_video, ov_seq, ov_masks, ov_out);
    if (*ablate) return cmd_ablate(common, ab_toggles, ab_seeds, ab_out);
    std::cerr << "error=usage msg=\"no subcommand\"\n";
    return 1;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error=usage msg=\"" << e.what() << "\"\n";
    return 1;
  } catch (const rvos::pipeline::NumericError& e) {
    std::cerr << "error=numeric msg=\"" << e.what() << "\"\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error=usage msg=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error=data msg=\"" << e.what() << "\"\n";
    return 2;
  }
}
