#include <cmath>
#include <random>

#include "doctest.h"
#include "mina/error.hpp"
#include "mina/eval.hpp"
#include "mina/follow.hpp"

using namespace mina;

namespace {

const Point3 kAtStandoff{-0.6, 0.0, 0.0};

bool saturated_ok(const VelocityCommand& c, const ControllerConfig& cfg) {
  return std::hypot(c.vx, c.vy) <= cfg.v_max + 1e-12 && std::abs(c.omega) <= cfg.omega_max + 1e-12;
}

}  // namespace

TEST_CASE("equilibrium gives zero command") {
  const auto c = compute_command({0, 0, 0}, kAtStandoff);
  CHECK(c.vx == 0.0);
  CHECK(c.vy == 0.0);
  CHECK(c.omega == 0.0);
}

TEST_CASE("unit gain passes the walking velocity through") {
  ControllerConfig cfg;
  cfg.alpha = 1.0;
  const auto c = compute_command({0.5, 0, 0}, kAtStandoff, cfg);
  CHECK(c.vx == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::abs(c.vy) < 1e-12);
  CHECK(std::hypot(c.vx, c.vy) <= cfg.v_max);
}

TEST_CASE("saturation holds for any input") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  ControllerConfig cfg;
  FollowController ctl(cfg);
  for (int i = 0; i < 5000; ++i) {
    const auto c = ctl.compute({u(rng), u(rng), 0}, {u(rng), u(rng), 0}, 0.05 * i);
    CHECK(saturated_ok(c, cfg));
  }
}

TEST_CASE("deadband zeroes small inputs near standoff") {
  std::mt19937_64 rng(9);
  ControllerConfig cfg;
  std::uniform_real_distribution<double> small(-0.0099, 0.0099);
  for (int i = 0; i < 1000; ++i) {
    const Point3 v{small(rng), small(rng), 0};
    const double err = 0.0199 * std::uniform_real_distribution<double>(-1, 1)(rng);
    const double ang = std::uniform_real_distribution<double>(-3, 3)(rng);
    const Point3 p{(0.6 + err) * std::cos(ang), (0.6 + err) * std::sin(ang), 0};
    const auto c = compute_command(v, p, cfg);
    CHECK(c.vx == 0.0);
    CHECK(c.vy == 0.0);
    CHECK(c.omega == 0.0);
  }
}

TEST_CASE("command direction follows the walking direction") {
  ControllerConfig cfg;
  cfg.alpha = 1.0;
  for (double ang : {-2.5, -1.0, 0.0, 0.4, 1.7, 3.0}) {
    const Point3 v{0.3 * std::cos(ang), 0.3 * std::sin(ang), 0};
    const Point3 p{0.6 * std::cos(ang + 2.0), 0.6 * std::sin(ang + 2.0), 0};
    FollowController ctl(cfg);
    VelocityCommand c;
    for (int i = 0; i < 10; ++i) c = ctl.compute(v, p, 0.05 * i);
    CHECK(std::abs(std::remainder(std::atan2(c.vy, c.vx) - ang, 2 * std::numbers::pi)) < 1e-6);
  }
}

TEST_CASE("controller config validation") {
  ControllerConfig cfg;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  cfg = {};
  cfg.v_max = -1.0;
  CHECK_THROWS_AS(FollowController{cfg}, InvalidArgument);
}

TEST_CASE("base integration") {
  SimWorld world;
  const auto s0 = initial_state(WalkerModel::standing(-0.6, 0.0, 0.0), world);
  auto s = s0;
  for (int i = 0; i < 40; ++i) s = closed_loop_step(s, {}, 0.05, world);
  CHECK(s.base == s0.base);
  s = s0;
  for (int i = 0; i < 40; ++i) s = closed_loop_step(s, {0.5, 0.0, 0.0, 0.0}, 0.05, world);
  CHECK(std::abs(s.base.x - 1.0) < 1e-9);
  CHECK(std::abs(s.time - 2.0) < 1e-9);
  CHECK_THROWS_AS(closed_loop_step(s0, {}, 0.2, world), InvalidArgument);
  CHECK_THROWS_AS(closed_loop_step(s0, {}, 0.0, world), InvalidArgument);
}

TEST_CASE("closed loop with the classical segmenter") {
  FollowConfig cfg;
  cfg.duration = 30.0;
  const auto r = run_follow(cfg, [](const OccupancyGrid& g) { return baseline_segment(g); });
  REQUIRE(r.trajectory.size() >= 590);
  double worst = 0.0;
  for (const auto& rec : r.trajectory) {
    CHECK(saturated_ok(rec.cmd, cfg.controller));
    if (rec.t < 5.0) continue;
    const double d = std::hypot(rec.person.x - rec.base.x, rec.person.y - rec.base.y);
    worst = std::max(worst, std::abs(d - cfg.controller.standoff));
  }
  INFO("worst distance error " << worst);
  CHECK(worst <= 0.15);
}

TEST_CASE("closed loop is reproducible") {
  FollowConfig cfg;
  cfg.duration = 4.0;
  auto seg = [](const OccupancyGrid& g) { return baseline_segment(g); };
  const auto a = run_follow(cfg, seg);
  const auto b = run_follow(cfg, seg);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i)
    CHECK(trajectory_record_to_json(a.trajectory[i]) == trajectory_record_to_json(b.trajectory[i]));
  cfg.world.seed = 1;
  const auto c = run_follow(cfg, seg);
  CHECK(c.scans.back().ranges != a.scans.back().ranges);
}
