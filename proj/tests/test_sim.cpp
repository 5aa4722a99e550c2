#include <cmath>
#include <random>

#include "doctest.h"
#include "mina/error.hpp"
#include "mina/sim.hpp"

using namespace mina;

TEST_CASE("empty scene returns range_max everywhere") {
  const LaserScan s = cast_scan(Scene{}, LaserSpec{}, 1);
  CHECK(s.ranges.size() == 1081);
  for (double r : s.ranges) CHECK(r == 20.0);
}

TEST_CASE("single leg on the axis") {
  Scene scene;
  scene.legs = {LegDisk{{0.5, 0, 0}, 0.06}, LegDisk{{0.5, 5.0, 0}, 0.06}};
  LaserSpec spec;
  spec.range_noise_sigma = 0.0;
  const LaserScan s = cast_scan(scene, spec, 1);
  const std::size_t zero = 540;  // -135 deg + 540 * 0.25 deg
  CHECK(std::abs(s.angle(zero)) < 1e-12);
  CHECK(std::abs(s.ranges[zero] - 0.44) < 1e-12);
}

TEST_CASE("ray casting agrees with brute-force marching") {
  Scene scene;
  scene.legs = {LegDisk{{0.8, 0.1, 0}, 0.06}, LegDisk{{0.75, -0.15, 0}, 0.07}};
  scene.clutter = {ClutterBox{0.4, 0.6, 0.05, 0.03, 0.4}, ClutterBox{0.3, -0.5, 0.08, 0.04, -0.9}};
  auto inside = [&](double x, double y) {
    for (const auto& l : scene.legs)
      if (std::hypot(x - l.center.x, y - l.center.y) <= l.radius) return true;
    for (const auto& b : scene.clutter) {
      const double c = std::cos(b.yaw), s = std::sin(b.yaw);
      const double lx = c * (x - b.cx) + s * (y - b.cy);
      const double ly = -s * (x - b.cx) + c * (y - b.cy);
      if (std::abs(lx) <= b.hx && std::abs(ly) <= b.hy) return true;
    }
    return false;
  };
  LaserSpec spec;
  spec.range_noise_sigma = 0.0;
  spec.angle_min = -1.2;
  spec.angle_increment = 2.4 / 49.0;
  spec.beam_count = 50;
  spec.range_max = 3.0;
  const LaserScan s = cast_scan(scene, spec, 1);
  for (std::size_t i = 0; i < s.ranges.size(); ++i) {
    const double a = s.angle(i);
    double marched = spec.range_max;
    for (int k = 1; k < 3000; ++k) {
      const double d = k * 0.001;
      if (inside(d * std::cos(a), d * std::sin(a))) {
        marched = d;
        break;
      }
    }
    CHECK(std::abs(marched - s.ranges[i]) <= 0.002);
  }
}

TEST_CASE("scans are deterministic per seed and noise is clamped") {
  Scene scene;
  scene.legs = {LegDisk{{0.5, 0.1, 0}, 0.06}, LegDisk{{0.5, -0.12, 0}, 0.06}};
  for (int k = 0; k < 5; ++k) scene.clutter.push_back(ClutterBox{-0.5 + 0.2 * k, 0.8, 0.04, 0.04, 0.1 * k});
  const LaserScan a = cast_scan(scene, LaserSpec{}, 42);
  const LaserScan b = cast_scan(scene, LaserSpec{}, 42);
  CHECK(a.ranges == b.ranges);
  const LaserScan c = cast_scan(scene, LaserSpec{}, 43);
  CHECK(a.ranges != c.ranges);
  for (double r : a.ranges) {
    CHECK(r >= 0.0);
    CHECK(r <= 20.0);
  }
}

TEST_CASE("walker kinematics") {
  WalkerModel still = WalkerModel::standing(1.0, 2.0, 0.3);
  auto [next, legs] = step_walker(still, 0.1);
  const auto before = still.legs();
  CHECK(legs[0].center == before[0].center);
  CHECK(legs[1].center == before[1].center);

  WalkerModel w = WalkerModel::walking(0, 0, 0.7, 0.5, 1.0);
  for (int i = 0; i < 1000; ++i) w = step_walker(w, 0.01).first;
  CHECK(std::abs(std::hypot(w.x, w.y) - 5.0) < 1e-9);
  CHECK(std::abs(std::atan2(w.y, w.x) - 0.7) < 1e-9);

  CHECK_THROWS_AS(step_walker(w, 0.0), InvalidArgument);
  WalkerModel bad = w;
  bad.cadence = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("mean foot velocity over a gait cycle equals walking speed") {
  const double speed = 0.8, stride = 1.2;
  WalkerModel w = WalkerModel::walking(0, 0, 0.0, speed, stride, 0.1, 0.3);
  const double period = stride / speed;
  const int n = 20000;
  const double dt = period / n;
  const auto start = w.legs();
  for (int i = 0; i < n; ++i) w = step_walker(w, dt).first;
  const auto end = w.legs();
  for (int k = 0; k < 2; ++k) {
    const double v = (end[k].center.x - start[k].center.x) / period;
    CHECK(std::abs(v - speed) < 1e-6);
  }
}

TEST_CASE("successive foot rests are one stride apart") {
  const double speed = 0.5, stride = 1.0;
  WalkerModel w = WalkerModel::walking(0, 0, 0.0, speed, stride);
  const double dt = 0.001;
  std::array<std::vector<double>, 2> rests;
  std::array<double, 2> prev_speed{1e9, 1e9}, prev_prev{1e9, 1e9};
  auto legs = w.legs();
  for (int i = 0; i < 8000; ++i) {
    auto [nw, nl] = step_walker(w, dt);
    for (int k = 0; k < 2; ++k) {
      const double v = distance(nl[k].center, legs[k].center) / dt;
      if (prev_speed[k] < prev_prev[k] && prev_speed[k] <= v) rests[k].push_back(legs[k].center.x);
      prev_prev[k] = prev_speed[k];
      prev_speed[k] = v;
    }
    w = nw;
    legs = nl;
  }
  for (int k = 0; k < 2; ++k) {
    REQUIRE(rests[k].size() >= 3);
    for (std::size_t i = 1; i < rests[k].size(); ++i)
      CHECK(std::abs(rests[k][i] - rests[k][i - 1] - stride) < 0.01 * stride);
  }
}

TEST_CASE("protocol trials") {
  const auto trials = gen_protocol_trials(3);
  REQUIRE(trials.size() == 18);
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    CHECK(t.scenario == (i < 9 ? 1 : 2));
    CHECK(t.location == static_cast<int>(i % 9) + 1);
    const int boxes = static_cast<int>(t.scene.clutter.size());
    if (t.scenario == 1) {
      CHECK(boxes <= 2);
    } else {
      CHECK(boxes >= 6);
      CHECK(boxes <= 8);
    }
    for (const auto& l : t.scene.legs) CHECK(l.center.norm() + l.radius < 20.0);
    for (const auto& b : t.scene.clutter) CHECK(std::hypot(b.cx, b.cy) + b.bounding_radius() < 20.0);
    for (auto v : t.truth.mask.pixels()) CHECK((v == 0 || v == 255));
  }
  const auto& centre = trials[4];
  CHECK(centre.location == 5);
  const Point3 mid = 0.5 * (centre.scene.legs[0].center + centre.scene.legs[1].center);
  CHECK(std::abs(mid.x - 0.8) < 1e-12);
  CHECK(std::abs(mid.y) < 1e-12);

  const auto again = gen_protocol_trials(3);
  for (std::size_t i = 0; i < 18; ++i) {
    CHECK(again[i].truth.mask == trials[i].truth.mask);
    CHECK(trial_scan(again[i]).ranges == trial_scan(trials[i]).ranges);
  }
}

TEST_CASE("ground-truth mask contains the rasterized leg surface") {
  for (const auto& t : gen_protocol_trials(5)) {
    const LabeledScan ls = cast_scan_labeled(t.scene, LaserSpec{}, t.scene.seed);
    for (std::size_t i = 0; i < ls.hits.size(); ++i) {
      if (ls.hits[i] != HitKind::Leg0 && ls.hits[i] != HitKind::Leg1) continue;
      const double d = ls.scan.ranges[i];
      const auto p = pixel_of(d * std::cos(ls.scan.angle(i)), d * std::sin(ls.scan.angle(i)), GridSpec{});
      if (p) CHECK(t.truth.mask.occupied(p->px, p->py));
    }
    // Both legs visible: each has a surface centre near its disk.
    for (int k = 0; k < 2; ++k) CHECK(distance(t.truth.surface_centers[k], t.truth.leg_centers[k]) < 0.07);
  }
}

TEST_CASE("training set") {
  const auto a = gen_training_set(4, 9);
  const auto b = gen_training_set(4, 9);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a[i].grid == b[i].grid);
    CHECK(a[i].mask == b[i].mask);
  }
  for (const auto& p : gen_training_set(30, 2)) {
    CHECK(p.grid.size() == 256);
    CHECK(p.mask.count_occupied() > 0);
    for (int px = 0; px < 256; ++px)
      for (int py = 0; py < 256; ++py) {
        if (!p.mask.occupied(px, py)) continue;
        bool near = false;
        for (int dx = -1; dx <= 1 && !near; ++dx)
          for (int dy = -1; dy <= 1 && !near; ++dy)
            near = p.grid.in_bounds(px + dx, py + dy) && p.grid.occupied(px + dx, py + dy);
        CHECK(near);
      }
  }
}
