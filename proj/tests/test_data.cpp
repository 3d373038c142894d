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

#include <cmath>
#include <filesystem>
#include <set>

#include "rvos/dataset.hpp"
#include "rvos/flow.hpp"
#include "rvos/synth.hpp"
#include "rvos/vision_ops.hpp"

using namespace rvos;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("rvos_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

synth::SynthScene two_object_scene() {
  synth::SynthScene s;
  s.name = "fixture";
  s.width = 48;
  s.height = 48;
  s.frames = 4;
  synth::ObjectSpec a;
  a.kind = synth::ShapeKind::Disk;
  a.radius = 7;
  a.cx0 = 15;
  a.cy0 = 14;
  a.vx = 1.5;
  a.vy = 0.5;
  a.depth = 0;
  synth::ObjectSpec b;
  b.kind = synth::ShapeKind::Rect;
  b.half_w = 6;
  b.half_h = 5;
  b.cx0 = 33;
  b.cy0 = 33;
  b.vx = -1.0;
  b.vy = 0.0;
  b.depth = 1;
  s.objects = {a, b};
  return s;
}

}  // namespace

TEST_CASE("generator determinism and label structure") {
  const auto scene = two_object_scene();
  const auto v1 = synth::generate(scene, 9);
  const auto v2 = synth::generate(scene, 9);
  CHECK(v1.n_objects == 2);
  REQUIRE(v1.frames.size() == 4);
  for (size_t t = 0; t < v1.frames.size(); ++t) {
    CHECK(v1.frames[t].rgb == v2.frames[t].rgb);
    CHECK(v1.masks[t].labels == v2.masks[t].labels);
  }
  const auto v3 = synth::generate(scene, 10);
  CHECK(v1.frames[0].rgb != v3.frames[0].rgb);  // seed re-keys textures

  for (const auto& m : v1.masks) {
    std::set<int> labels;
    for (uint8_t l : m.labels)
      if (l) labels.insert(l);
    CHECK(labels == std::set<int>{1, 2});
  }
}

TEST_CASE("generator rejects scenes that leave the canvas") {
  synth::SynthScene s;
  s.width = 32;
  s.height = 32;
  s.frames = 6;
  synth::ObjectSpec o;
  o.kind = synth::ShapeKind::Disk;
  o.radius = 6;
  o.cx0 = 26;
  o.cy0 = 16;
  o.vx = 3.0;  // runs off the right edge
  s.objects = {o};
  CHECK_THROWS_WITH_AS(synth::generate(s, 1), doctest::Contains("leaves the canvas"),
                       std::invalid_argument);
}

TEST_CASE("occlusion ordering: the front object owns overlapping pixels") {
  synth::SynthScene s;
  s.width = 32;
  s.height = 32;
  s.frames = 2;
  synth::ObjectSpec back;
  back.kind = synth::ShapeKind::Disk;
  back.radius = 8;
  back.cx0 = 14;
  back.cy0 = 16;
  back.depth = 0;
  synth::ObjectSpec front = back;
  front.cx0 = 20;
  front.depth = 5;
  s.objects = {back, front};
  const auto v = synth::generate(s, 1);
  // the midpoint between centers is covered by both; label must be 2 (front)
  CHECK(v.masks[0].at(16, 17) == 2);
}

TEST_CASE("indexed palette png round trip is exact") {
  TempDir tmp("png");
  Rng rng(3);
  img::LabelMask m(33, 21);
  for (auto& l : m.labels) l = static_cast<uint8_t>(rng.uniform_int(21));  // labels 0..20
  const std::string path = (tmp.path / "mask.png").string();
  img::save_label_png(m, path);
  const img::LabelMask back = img::load_label_png(path);
  CHECK(back.width == m.width);
  CHECK(back.height == m.height);
  CHECK(back.labels == m.labels);
}

TEST_CASE("all-background masks and rgb frames round trip") {
  TempDir tmp("png2");
  img::LabelMask zero(16, 16);
  const std::string path = (tmp.path / "zero.png").string();
  img::save_label_png(zero, path);
  CHECK(img::load_label_png(path).labels == zero.labels);

  Rng rng(5);
  img::Frame f;
  f.width = 17;
  f.height = 9;
  f.rgb.resize(17 * 9 * 3);
  for (auto& v : f.rgb) v = rng.uniform();
  const std::string fpath = (tmp.path / "frame.png").string();
  img::save_rgb_png(f, fpath);
  const img::Frame back = img::load_image(fpath);
  REQUIRE(back.width == f.width);
  REQUIRE(back.height == f.height);
  for (size_t i = 0; i < f.rgb.size(); ++i)
    CHECK(std::abs(back.rgb[i] - f.rgb[i]) <= 0.5f / 255.0f + 1e-6f);
}

TEST_CASE("save_video then load_davis reproduces the record") {
  TempDir tmp("davis");
  const auto scene = two_object_scene();
  const auto video = synth::generate(scene, 4);
  data::save_video(video, tmp.path.string());

  const auto loaded = data::load_davis(tmp.path.string());
  REQUIRE(loaded.size() == 1);
  const auto& rec = loaded[0];
  CHECK(rec.name == "fixture");
  CHECK(rec.n_objects == 2);
  REQUIRE(rec.frame_count() == 4);
  for (int t = 0; t < 4; ++t) {
    CHECK(rec.masks[static_cast<size_t>(t)].labels == video.masks[static_cast<size_t>(t)].labels);
    for (size_t i = 0; i < rec.frames[static_cast<size_t>(t)].rgb.size(); ++i)
      CHECK(std::abs(rec.frames[static_cast<size_t>(t)].rgb[i] -
                     video.frames[static_cast<size_t>(t)].rgb[i]) <= 0.5f / 255.0f + 1e-6f);
  }
  // analytic flows round trip bitwise through the .flo sidecars
  for (int t = 0; t < 3; ++t) {
    REQUIRE(rec.flow_fwd[static_cast<size_t>(t)].has_value());
    CHECK(rec.flow_fwd[static_cast<size_t>(t)]->dx == video.flow_fwd[static_cast<size_t>(t)]->dx);
  }
  REQUIRE(rec.flow_bwd[1].has_value());
  CHECK(rec.flow_bwd[1]->dy == video.flow_bwd[1]->dy);
}

TEST_CASE("load_davis rejects a sequence without a first-frame annotation") {
  TempDir tmp("nofirst");
  const auto video = synth::generate(two_object_scene(), 4);
  data::save_video(video, tmp.path.string());
  fs::remove(tmp.path / "Annotations" / "fixture" / "00000.png");
  CHECK_THROWS_WITH_AS(data::load_davis(tmp.path.string()),
                       doctest::Contains("no annotation for first frame"), std::runtime_error);
}

TEST_CASE("load_davis rejects dimension mismatches") {
  TempDir tmp("dims");
  const auto video = synth::generate(two_object_scene(), 4);
  data::save_video(video, tmp.path.string());
  img::LabelMask wrong(24, 24);
  img::save_label_png(wrong, (tmp.path / "Annotations" / "fixture" / "00001.png").string());
  CHECK_THROWS_WITH_AS(data::load_davis(tmp.path.string()),
                       doctest::Contains("dimensions mismatch"), std::runtime_error);
}

TEST_CASE("labels absent from the first frame are ignored with a warning") {
  TempDir tmp("extra");
  const auto video = synth::generate(two_object_scene(), 4);
  data::save_video(video, tmp.path.string());
  img::LabelMask m = video.masks[2];
  m.at(2, 2) = 7;  // label never present in frame 0
  img::save_label_png(m, (tmp.path / "Annotations" / "fixture" / "00002.png").string());
  const auto loaded = data::load_davis(tmp.path.string());
  CHECK(loaded[0].n_objects == 2);
  CHECK(loaded[0].masks[2].at(2, 2) == 0);
}

TEST_CASE("predictions save and reload exactly") {
  TempDir tmp("pred");
  Rng rng(6);
  std::vector<img::LabelMask> masks;
  std::vector<std::string> names;
  for (int t = 0; t < 3; ++t) {
    img::LabelMask m(20, 12);
    for (auto& l : m.labels) l = static_cast<uint8_t>(rng.uniform_int(4));
    masks.push_back(m);
    names.push_back("0000" + std::to_string(t));
  }
  data::save_predictions(masks, names, (tmp.path / "out").string());
  const auto back = data::load_predictions((tmp.path / "out").string());
  REQUIRE(back.size() == 3);
  for (int t = 0; t < 3; ++t) CHECK(back[static_cast<size_t>(t)].labels == masks[static_cast<size_t>(t)].labels);
}

TEST_CASE("instance palette is fixed and background is black") {
  const auto c0 = img::instance_color(0);
  CHECK(c0 == std::array<uint8_t, 3>{0, 0, 0});
  CHECK(img::instance_color(1) == std::array<uint8_t, 3>{128, 0, 0});
  CHECK(img::instance_color(2) == std::array<uint8_t, 3>{0, 128, 0});
  CHECK(img::instance_color(1) == img::instance_color(1));
}
