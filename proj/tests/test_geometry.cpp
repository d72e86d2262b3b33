// Copyright 2026 The MRAC Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "mrac/geometry.hpp"
#include "oracles.hpp"

using namespace mrac;
using namespace mrac::geometry;

namespace {

BoundingBox random_int_box(std::mt19937& rng) {
  std::uniform_int_distribution<int> coord(0, 12);
  std::uniform_int_distribution<int> side(1, 8);
  const int x = coord(rng);
  const int y = coord(rng);
  return {double(x), double(y), double(x + side(rng)), double(y + side(rng))};
}

BoundingBox random_box(std::mt19937& rng) {
  std::uniform_real_distribution<double> coord(-50.0, 50.0);
  std::uniform_real_distribution<double> side(0.5, 40.0);
  const double x = coord(rng);
  const double y = coord(rng);
  return {x, y, x + side(rng), y + side(rng)};
}

BoundingBox scaled(const BoundingBox& b, double k) { return {b.x1 * k, b.y1 * k, b.x2 * k, b.y2 * k}; }

InstanceTrack unit_track(int frames) {
  InstanceTrack t;
  for (int f = 0; f < frames; ++f) t.boxes[f] = {0, 0, 1, 1};
  return t;
}

}  // namespace

TEST_CASE("iou hand values") {
  const BoundingBox a{0, 0, 2, 2};
  const BoundingBox b{1, 1, 3, 3};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
  CHECK(iou({0, 0, 1, 1}, {2, 2, 3, 3}) == 0.0);
  CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou({0, 0, 0, 0}, {0, 0, 0, 0}) == 0.0);
}

TEST_CASE("giou hand values and limits") {
  const BoundingBox a{0, 0, 2, 2};
  const BoundingBox b{1, 1, 3, 3};
  CHECK(giou(a, a) == 1.0);
  CHECK(giou(a, b) == doctest::Approx(-5.0 / 63.0).epsilon(1e-15));
  CHECK_THROWS_AS(giou({1, 1, 1, 1}, {1, 1, 1, 1}), DomainError);
  double previous = 1.0;
  for (double d = 1.0; d < 1e6; d *= 2.0) {
    const double g = giou({0, 0, 1, 1}, {d, 0, d + 1, 1});
    CHECK(g < previous + 1e-15);
    CHECK(g > -1.0);
    previous = g;
  }
  CHECK(previous < -0.999);
}

TEST_CASE("temporal iou hand values") {
  CHECK(temporal_iou({0, 4}, {0, 4}) == 1.0);
  CHECK(temporal_iou({0, 4}, {4, 8}) == 0.0);
  CHECK(temporal_iou({0, 3}, {1, 4}) == 0.5);
}

TEST_CASE("tube siou hand values") {
  const InstanceTrack t = unit_track(10);
  const RepetitionProposal p{0, 3};
  const RepetitionProposal q{1, 4};
  CHECK(tube_siou({t, p}, {t, p}) == 1.0);
  CHECK(tube_siou({t, p}, {t, q}) == 0.5);
  CHECK(tube_siou({t, p}, {t, q}, TubeOverlapMode::TemporalOnly) == 0.5);
  InstanceTrack far;
  for (int f = 0; f < 10; ++f) far.boxes[f] = {5, 5, 6, 6};
  CHECK(tube_siou({t, p}, {far, p}) == 0.0);
}

TEST_CASE("overlaps agree with rasterized oracles on integer boxes") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const BoundingBox a = random_int_box(rng);
    const BoundingBox b = random_int_box(rng);
    CHECK(iou(a, b) == doctest::Approx(oracle::raster_iou(a, b)).epsilon(1e-12));
  }
  std::uniform_int_distribution<int> frame(0, 15);
  std::bernoulli_distribution present(0.8);
  for (int trial = 0; trial < 200; ++trial) {
    InstanceTrack pt;
    InstanceTrack gt;
    for (int f = 0; f < 20; ++f) {
      if (present(rng)) pt.boxes[f] = random_int_box(rng);
      if (present(rng)) gt.boxes[f] = random_int_box(rng);
    }
    const int s1 = frame(rng);
    const int s2 = frame(rng);
    const RepetitionProposal ps{s1, s1 + 1 + frame(rng) % 5};
    const RepetitionProposal gs{s2, s2 + 1 + frame(rng) % 5};
    CHECK(tube_siou({pt, ps}, {gt, gs}) ==
          doctest::Approx(oracle::raster_tube_siou(pt, ps, gt, gs)).epsilon(1e-12));
  }
}

TEST_CASE("symmetry, ordering and scale invariance") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const BoundingBox a = random_box(rng);
    const BoundingBox b = random_box(rng);
    const double k = scale(rng);
    CHECK(iou(a, b) == iou(b, a));
    CHECK(giou(a, b) == doctest::Approx(giou(b, a)).epsilon(1e-15));
    CHECK(giou(a, b) <= iou(a, b) + 1e-15);
    CHECK(std::abs(iou(scaled(a, k), scaled(b, k)) - iou(a, b)) < 1e-9);
    CHECK(std::abs(giou(scaled(a, k), scaled(b, k)) - giou(a, b)) < 1e-9);
  }
}

TEST_CASE("giou equals iou exactly when the hull is the union") {
  // Boxes sharing full height and touching or overlapping: union is a box.
  CHECK(giou({0, 0, 2, 1}, {1, 0, 3, 1}) == doctest::Approx(iou({0, 0, 2, 1}, {1, 0, 3, 1})));
  CHECK(giou({0, 0, 4, 4}, {1, 1, 2, 2}) == doctest::Approx(iou({0, 0, 4, 4}, {1, 1, 2, 2})));
  CHECK(giou({0, 0, 2, 2}, {1, 1, 3, 3}) < iou({0, 0, 2, 2}, {1, 1, 3, 3}));
}

TEST_CASE("tube siou on unit squares reduces to temporal iou") {
  std::mt19937 rng(8);
  std::uniform_int_distribution<int> start(0, 30);
  std::uniform_int_distribution<int> len(1, 12);
  const InstanceTrack t = unit_track(50);
  for (int trial = 0; trial < 500; ++trial) {
    const int s1 = start(rng);
    const int s2 = start(rng);
    const RepetitionProposal p{s1, s1 + len(rng)};
    const RepetitionProposal q{s2, s2 + len(rng)};
    CHECK(tube_siou({t, p}, {t, q}) == doctest::Approx(temporal_iou(p, q)).epsilon(1e-12));
    CHECK(tube_siou({t, p}, {t, q}) == tube_siou({t, q}, {t, p}));
  }
}

TEST_CASE("tube siou is scale invariant") {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    InstanceTrack a;
    InstanceTrack b;
    for (int f = 0; f < 10; ++f) {
      a.boxes[f] = random_box(rng);
      b.boxes[f] = random_box(rng);
    }
    InstanceTrack as = a;
    InstanceTrack bs = b;
    for (auto& [f, box] : as.boxes) box = scaled(box, 3.7);
    for (auto& [f, box] : bs.boxes) box = scaled(box, 3.7);
    const RepetitionProposal p{1, 7};
    const RepetitionProposal q{3, 9};
    CHECK(std::abs(tube_siou({a, p}, {b, q}) - tube_siou({as, p}, {bs, q})) < 1e-9);
  }
}

TEST_CASE("mode names round trip") {
  CHECK(tube_mode_from_string(to_string(TubeOverlapMode::Spatiotemporal)) ==
        TubeOverlapMode::Spatiotemporal);
  CHECK(tube_mode_from_string(to_string(TubeOverlapMode::TemporalOnly)) ==
        TubeOverlapMode::TemporalOnly);
  CHECK_THROWS_AS(tube_mode_from_string("bogus"), ValidationError);
}
