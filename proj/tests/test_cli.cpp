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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rvos/dataset.hpp"
#include "rvos/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("rvos_cli_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(RVOS_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit 1, data errors exit 2") {
  TempDir tmp("codes");
  CHECK(run_cli("train --stage bogus --data x --out y", tmp.path / "log1") == 1);
  CHECK(run_cli("train --stage recurrent --data x --out y", tmp.path / "log2") == 1);
  CHECK(run_cli("infer --video /nonexistent --ckpt none.ckpt --out o", tmp.path / "log3") == 2);
  CHECK(slurp(tmp.path / "log1").find("error=usage") != std::string::npos);
  CHECK(slurp(tmp.path / "log3").find("error=data") != std::string::npos);
}

TEST_CASE("config files with unknown keys are rejected") {
  TempDir tmp("badcfg");
  std::ofstream(tmp.path / "cfg.json") << R"({"seed": 1, "learningrate": 2})";
  CHECK(run_cli("synth --out " + (tmp.path / "d").string() + " --config " +
                    (tmp.path / "cfg.json").string(),
                tmp.path / "log") == 1);
  CHECK(slurp(tmp.path / "log").find("unknown key") != std::string::npos);
}

TEST_CASE("eval on predictions equal to ground truth reports perfect J and F") {
  TempDir tmp("eval");
  const auto scenes = rvos::synth::small_heldout_suite(3);
  const auto video = rvos::synth::generate(scenes[0], 3);
  rvos::data::save_video(video, (tmp.path / "gt").string());
  rvos::data::save_predictions(video.masks, video.frame_names,
                               (tmp.path / "pred" / video.name).string());
  CHECK(run_cli("eval --pred " + (tmp.path / "pred").string() + " --gt " +
                    (tmp.path / "gt").string() + " --report " +
                    (tmp.path / "report.json").string(),
                tmp.path / "log") == 0);
  std::ifstream rf(tmp.path / "report.json");
  json report = json::parse(rf);
  CHECK(report["overall"]["J"]["mean"].get<double>() == 1.0);
  CHECK(report["overall"]["F"]["mean"].get<double>() == 1.0);
  CHECK(report["schema"].get<int>() == 1);
}

TEST_CASE("ablate emits one row per requested toggle combination") {
  TempDir tmp("ablate");
  std::ofstream(tmp.path / "cfg.json")
      << R"({"seed": 4, "threads": 2,
             "seg": {"stages": [[1,4],[1,6]]},
             "train": {"epochs": 1, "window": 2, "base_lr": 1e-3,
                        "online_lr": 3e-4, "online_iterations": 5}})";
  CHECK(run_cli("ablate --toggles astream,warp --seeds 1 --out " + (tmp.path / "out").string() +
                    " --config " + (tmp.path / "cfg.json").string(),
                tmp.path / "log") == 0);
  std::ifstream rf(tmp.path / "out" / "ablate_report.json");
  json report = json::parse(rf);
  REQUIRE(report["rows"].size() == 2);
  CHECK(report["rows"][0]["name"] == "astream");
  CHECK(report["rows"][1]["name"] == "warp");
  CHECK(report["rows"][0]["seeds"].size() == 1);
  CHECK(report["rows"][0]["seeds"][0].contains("mean_iou"));
  CHECK(report["rows"][0]["seeds"][0].contains("outlier_iou"));
}
