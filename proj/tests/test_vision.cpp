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

#include "rvos/vision_ops.hpp"

using namespace rvos;
using img::BinMask;
using img::FlowField;
using img::Frame;
using img::GrayMap;

namespace {

GrayMap random_map(int w, int h, Rng& rng) {
  GrayMap m(w, h);
  for (auto& v : m.v) v = rng.uniform();
  return m;
}

BinMask random_mask(int w, int h, Rng& rng, float density = 0.3f) {
  BinMask m(w, h);
  for (auto& v : m.fg) v = rng.bernoulli(density) ? 1 : 0;
  return m;
}

BinMask square_mask(int w, int h, int x0, int y0, int side) {
  BinMask m(w, h);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) m.at(y, x) = 1;
  return m;
}

Frame random_frame(int w, int h, Rng& rng) {
  Frame f;
  f.width = w;
  f.height = h;
  f.rgb.resize(static_cast<size_t>(w) * h * 3);
  for (auto& v : f.rgb) v = rng.uniform();
  return f;
}

FlowField constant_flow(int w, int h, float dx, float dy) {
  FlowField f(w, h);
  std::fill(f.dx.begin(), f.dx.end(), dx);
  std::fill(f.dy.begin(), f.dy.end(), dy);
  return f;
}

}  // namespace

TEST_CASE("warp_backward with zero flow is the identity") {
  Rng rng(1);
  const GrayMap m = random_map(9, 7, rng);
  const GrayMap out = vision::warp_backward(m, FlowField(9, 7));
  CHECK(out.v == m.v);

  const Frame f = random_frame(9, 7, rng);
  CHECK(vision::warp_backward(f, FlowField(9, 7)).rgb == f.rgb);
}

TEST_CASE("warp_backward shifts content against the flow") {
  // single 1-pixel, constant flow (1,0): the spike moves one pixel left
  GrayMap m(8, 8);
  m.at(3, 5) = 1.0f;
  const GrayMap out = vision::warp_backward(m, constant_flow(8, 8, 1.0f, 0.0f));
  GrayMap expect(8, 8);
  expect.at(3, 4) = 1.0f;  // out(p) = m(p + 1)
  CHECK(out.v == expect.v);

  // half-pixel flow blends equal neighbors
  GrayMap two(2, 1);
  two.at(0, 0) = 0.0f;
  two.at(0, 1) = 1.0f;
  const GrayMap mid = vision::warp_backward(two, constant_flow(2, 1, 0.5f, 0.0f));
  CHECK(mid.at(0, 0) == doctest::Approx(0.5f));
}

TEST_CASE("warp_backward reads zero outside the image") {
  GrayMap m(4, 4, 1.0f);
  const GrayMap out = vision::warp_backward(m, constant_flow(4, 4, 10.0f, 0.0f));
  for (float v : out.v) CHECK(v == 0.0f);
}

TEST_CASE("warp_backward is linear in the map") {
  Rng rng(2);
  const GrayMap m1 = random_map(12, 10, rng);
  const GrayMap m2 = random_map(12, 10, rng);
  FlowField flow(12, 10);
  for (auto& v : flow.dx) v = rng.uniform(-2.0f, 2.0f);
  for (auto& v : flow.dy) v = rng.uniform(-2.0f, 2.0f);
  const float a = 0.7f, b = -0.4f;
  GrayMap combo(12, 10);
  for (size_t i = 0; i < combo.v.size(); ++i) combo.v[i] = a * m1.v[i] + b * m2.v[i];
  const GrayMap w_combo = vision::warp_backward(combo, flow);
  const GrayMap w1 = vision::warp_backward(m1, flow);
  const GrayMap w2 = vision::warp_backward(m2, flow);
  for (size_t i = 0; i < combo.v.size(); ++i)
    CHECK(std::abs(w_combo.v[i] - (a * w1.v[i] + b * w2.v[i])) <= 1e-5f);
}

TEST_CASE("flow_magnitude") {
  FlowField f(2, 1);
  f.dx = {3.0f, 0.0f};
  f.dy = {4.0f, 0.0f};
  const GrayMap m = vision::flow_magnitude(f);
  CHECK(m.v[0] == doctest::Approx(5.0f));
  CHECK(m.v[1] == 0.0f);

  Rng rng(3);
  FlowField r(7, 5);
  for (auto& v : r.dx) v = rng.uniform(-3.0f, 3.0f);
  for (auto& v : r.dy) v = rng.uniform(-3.0f, 3.0f);
  const GrayMap mm = vision::flow_magnitude(r);
  for (size_t i = 0; i < mm.v.size(); ++i)
    CHECK(mm.v[i] ==
          doctest::Approx(std::sqrt(r.dx[i] * r.dx[i] + r.dy[i] * r.dy[i])).epsilon(1e-6));
}

TEST_CASE("tight_bbox basics and exhaustive-scan oracle") {
  BinMask single(8, 8);
  single.at(3, 5) = 1;
  const auto box = vision::tight_bbox(single, 1);
  REQUIRE(box.has_value());
  CHECK(box->x_min == 5.0f);
  CHECK(box->x_max == 6.0f);
  CHECK(box->y_min == 3.0f);
  CHECK(box->y_max == 4.0f);

  CHECK_FALSE(vision::tight_bbox(BinMask(8, 8), 1).has_value());
  CHECK_FALSE(vision::tight_bbox(single, 2).has_value());  // below min_area

  Rng rng(4);
  for (int inst = 0; inst < 1000; ++inst) {
    const BinMask m = random_mask(12, 9, rng, 0.15f);
    const auto got = vision::tight_bbox(m, 1);
    int xm = 12, xM = -1, ym = 9, yM = -1;
    int64_t area = 0;
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 12; ++x)
        if (m.at(y, x)) {
          ++area;
          xm = std::min(xm, x);
          xM = std::max(xM, x);
          ym = std::min(ym, y);
          yM = std::max(yM, y);
        }
    if (area == 0) {
      CHECK_FALSE(got.has_value());
    } else {
      REQUIRE(got.has_value());
      CHECK(got->x_min == static_cast<float>(xm));
      CHECK(got->x_max == static_cast<float>(xM + 1));
      CHECK(got->y_min == static_cast<float>(ym));
      CHECK(got->y_max == static_cast<float>(yM + 1));
    }
  }
}

TEST_CASE("two blobs share one box") {
  BinMask m(16, 16);
  m.at(2, 2) = 1;
  m.at(12, 13) = 1;
  const auto box = vision::tight_bbox(m, 1);
  REQUIRE(box.has_value());
  CHECK(box->x_min == 2.0f);
  CHECK(box->x_max == 14.0f);
  CHECK(box->y_min == 2.0f);
  CHECK(box->y_max == 13.0f);
}

TEST_CASE("perturb_mask: neutral draw is the identity") {
  Rng rng(5);
  const BinMask m = square_mask(32, 32, 10, 12, 8);
  const BinMask out = vision::apply_perturbation(m, vision::PerturbDraw{});
  CHECK(out.fg == m.fg);
}

TEST_CASE("perturb_mask: pure integer translation shifts exactly") {
  const BinMask m = square_mask(32, 32, 10, 10, 8);
  vision::PerturbDraw d;
  d.tx = 2.0;
  const BinMask out = vision::apply_perturbation(m, d);
  const BinMask expect = square_mask(32, 32, 12, 10, 8);
  CHECK(out.fg == expect.fg);
  // IoU against the original: overlap 6x8 of union 10x8
  int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < m.fg.size(); ++i) {
    inter += (m.fg[i] && out.fg[i]) ? 1 : 0;
    uni += (m.fg[i] || out.fg[i]) ? 1 : 0;
  }
  CHECK(static_cast<double>(inter) / uni == doctest::Approx(48.0 / 80.0));
}

TEST_CASE("perturb_mask determinism and binaryness") {
  const BinMask m = square_mask(48, 48, 15, 18, 10);
  Rng a(42), b(42), c(43);
  const BinMask pa = vision::perturb_mask(m, a);
  const BinMask pb = vision::perturb_mask(m, b);
  BinMask pc = vision::perturb_mask(m, c);
  CHECK(pa.fg == pb.fg);
  CHECK(pa.width == m.width);
  CHECK(pa.height == m.height);
  for (uint8_t v : pa.fg) CHECK((v == 0 || v == 1));
  for (int i = 0; i < 8; ++i) pc = vision::perturb_mask(pc, c);
  (void)pc;
}

TEST_CASE("augment: horizontal flip is an involution and reorients flow") {
  Rng rng(6);
  const int w = 24, h = 16;
  const Frame f = random_frame(w, h, rng);
  const BinMask m = square_mask(w, h, 4, 5, 6);
  FlowField flow(w, h);
  for (auto& v : flow.dx) v = rng.uniform(-2.0f, 2.0f);
  for (auto& v : flow.dy) v = rng.uniform(-2.0f, 2.0f);

  vision::AugmentDraw flip;
  flip.hflip = true;
  flip.crop_w = w;
  flip.crop_h = h;
  const auto once = vision::apply_augment(f, m, flow, flip);
  // dx negated at the mirrored pixel
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      CHECK(once.flow.dx[static_cast<size_t>(y) * w + x] ==
            doctest::Approx(-flow.dx[static_cast<size_t>(y) * w + (w - 1 - x)]).epsilon(1e-5));
      CHECK(once.flow.dy[static_cast<size_t>(y) * w + x] ==
            doctest::Approx(flow.dy[static_cast<size_t>(y) * w + (w - 1 - x)]).epsilon(1e-5));
    }
  const auto twice = vision::apply_augment(once.frame, once.mask, once.flow, flip);
  CHECK(twice.frame.rgb == f.rgb);
  CHECK(twice.mask.fg == m.fg);
  for (size_t i = 0; i < flow.dx.size(); ++i) {
    CHECK(twice.flow.dx[i] == doctest::Approx(flow.dx[i]).epsilon(1e-5));
    CHECK(twice.flow.dy[i] == doctest::Approx(flow.dy[i]).epsilon(1e-5));
  }
}

TEST_CASE("augment: four quarter turns are the identity") {
  Rng rng(7);
  const int s = 20;  // square canvas
  const Frame f = random_frame(s, s, rng);
  const BinMask m = square_mask(s, s, 3, 8, 5);
  FlowField flow(s, s);
  for (auto& v : flow.dx) v = rng.uniform(-2.0f, 2.0f);
  for (auto& v : flow.dy) v = rng.uniform(-2.0f, 2.0f);

  vision::AugmentDraw rot;
  rot.angle_deg = 90.0;
  rot.crop_w = s;
  rot.crop_h = s;
  Frame cf = f;
  BinMask cm = m;
  FlowField cl = flow;
  for (int i = 0; i < 4; ++i) {
    auto r = vision::apply_augment(cf, cm, cl, rot);
    cf = std::move(r.frame);
    cm = std::move(r.mask);
    cl = std::move(r.flow);
  }
  CHECK(cm.fg == m.fg);
  for (size_t i = 0; i < f.rgb.size(); ++i) CHECK(cf.rgb[i] == doctest::Approx(f.rgb[i]).epsilon(1e-5));
  for (size_t i = 0; i < flow.dx.size(); ++i) {
    CHECK(cl.dx[i] == doctest::Approx(flow.dx[i]).epsilon(1e-4));
    CHECK(cl.dy[i] == doctest::Approx(flow.dy[i]).epsilon(1e-4));
  }
}

TEST_CASE("augment keeps frame/mask alignment on analytic scenes") {
  // integer translation: transformed mask must equal the mask of the
  // analytically transformed scene
  const int w = 32, h = 32;
  const BinMask m = square_mask(w, h, 8, 10, 6);
  Rng rng(8);
  const Frame f = random_frame(w, h, rng);
  vision::AugmentDraw d;
  d.tx = 3.0;
  d.ty = -2.0;
  d.crop_w = w;
  d.crop_h = h;
  const auto out = vision::apply_augment(f, m, FlowField(w, h), d);
  const BinMask expect = square_mask(w, h, 11, 8, 6);
  CHECK(out.mask.fg == expect.fg);
}

TEST_CASE("augment rejects tiny crops") {
  Rng rng(9);
  const Frame f = random_frame(16, 16, rng);
  const BinMask m(16, 16);
  vision::AugmentDraw d;
  d.crop_w = 4;
  d.crop_h = 4;
  CHECK_THROWS_AS(vision::apply_augment(f, m, FlowField(16, 16), d), std::invalid_argument);
  vision::AugmentParams p;
  p.crop_width = 7;
  p.crop_height = 7;
  Rng rng2(10);
  CHECK_THROWS_AS(vision::augment_pair(f, m, FlowField(16, 16), p, rng2), std::invalid_argument);
}

TEST_CASE("connected components, contours, morphology") {
  BinMask m(8, 8);
  // two 4-connected blobs, diagonal adjacency does not merge
  m.at(1, 1) = m.at(1, 2) = m.at(2, 1) = 1;
  m.at(3, 3) = 1;
  m.at(6, 6) = m.at(6, 7) = 1;
  int count = 0;
  const auto labels = vision::connected_components(m, count);
  CHECK(count == 3);
  CHECK(labels[1 * 8 + 1] == labels[2 * 8 + 1]);
  CHECK(labels[1 * 8 + 1] != labels[3 * 8 + 3]);

  const BinMask solid = square_mask(10, 10, 2, 2, 5);
  const BinMask contour = vision::contour_extract(solid);
  int64_t edge = 0;
  for (uint8_t v : contour.fg) edge += v;
  CHECK(edge == 16);  // 5x5 square boundary
  CHECK(contour.at(4, 4) == 0);

  const BinMask grown = vision::dilate(solid, 1);
  CHECK(grown.area() > solid.area());
  const BinMask back = vision::erode(grown, 1);
  int64_t mismatch = 0;
  for (size_t i = 0; i < solid.fg.size(); ++i) mismatch += solid.fg[i] != back.fg[i];
  CHECK(mismatch == 0);  // closing a convex square is exact

  // erosion then dilation never grows the mask
  Rng rng(11);
  const BinMask rnd = random_mask(12, 12, rng, 0.5f);
  const BinMask opened = vision::dilate(vision::erode(rnd, 1), 1);
  for (size_t i = 0; i < rnd.fg.size(); ++i)
    if (opened.fg[i]) CHECK(rnd.fg[i] == 1);
}

TEST_CASE("resize_bilinear endpoints") {
  GrayMap m(2, 2);
  m.v = {0.0f, 1.0f, 2.0f, 3.0f};
  const GrayMap up = vision::resize_bilinear(m, 4, 4);
  CHECK(up.width == 4);
  CHECK(up.at(0, 0) == doctest::Approx(0.0f));
  CHECK(up.at(3, 3) == doctest::Approx(3.0f));
  const GrayMap same = vision::resize_bilinear(m, 2, 2);
  CHECK(same.v == m.v);
  CHECK_THROWS_AS(vision::resize_bilinear(m, 0, 2), std::invalid_argument);
}
