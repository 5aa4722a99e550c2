#include "mina/follow.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "mina/error.hpp"

namespace mina {

void ControllerConfig::validate() const {
  if (!(gain >= 0.0) || !(standoff_gain >= 0.0)) throw InvalidArgument("controller gains must be >= 0");
  if (!(deadband >= 0.0) || !(distance_tolerance >= 0.0)) throw InvalidArgument("deadband must be >= 0");
  if (!(v_max > 0.0) || !(omega_max > 0.0)) throw InvalidArgument("v_max and omega_max must be > 0");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in (0, 1]");
  if (!(standoff > 0.0)) throw InvalidArgument("standoff must be > 0");
  if (!(heading_gain >= 0.0)) throw InvalidArgument("heading_gain must be >= 0");
}

FollowController::FollowController(ControllerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void FollowController::reset() { fx_ = fy_ = 0.0; }

VelocityCommand FollowController::compute(const Point3& v, const Point3& person, double timestamp) {
  if (!v.finite() || !person.finite()) throw InvalidArgument("controller inputs must be finite");
  VelocityCommand cmd;
  cmd.timestamp = timestamp;
  const double dist = std::hypot(person.x, person.y);
  const double err = dist - cfg_.standoff;
  const double speed = std::hypot(v.x, v.y);
  if (speed < cfg_.deadband && std::abs(err) < cfg_.distance_tolerance) {
    reset();
    return cmd;
  }
  double tx = cfg_.gain * v.x, ty = cfg_.gain * v.y;
  if (dist > 0.0) {
    tx += cfg_.standoff_gain * err * person.x / dist;
    ty += cfg_.standoff_gain * err * person.y / dist;
  }
  fx_ = cfg_.alpha * tx + (1.0 - cfg_.alpha) * fx_;
  fy_ = cfg_.alpha * ty + (1.0 - cfg_.alpha) * fy_;
  const double norm = std::hypot(fx_, fy_);
  if (norm > cfg_.v_max) {
    fx_ *= cfg_.v_max / norm;
    fy_ *= cfg_.v_max / norm;
  }
  if (norm >= cfg_.deadband) {
    cmd.vx = fx_;
    cmd.vy = fy_;
  }
  if (speed >= cfg_.deadband) {
    const double heading = std::atan2(v.y, v.x);
    cmd.omega = std::clamp(cfg_.heading_gain * heading, -cfg_.omega_max, cfg_.omega_max);
  }
  return cmd;
}

VelocityCommand compute_command(const Point3& walking_velocity, const Point3& person, const ControllerConfig& cfg) {
  FollowController c(cfg);
  return c.compute(walking_velocity, person);
}

namespace {

RigidTransform base_pose(const Pose2D& p) {
  return RigidTransform::planar(p.yaw, p.x, p.y, FrameId::RobotBase, FrameId::RobotBase);
}

std::uint64_t step_seed(std::uint64_t seed, std::uint64_t step) {
  return seed * 0x9E3779B97F4A7C15ULL + step + 1;
}

}  // namespace

LaserScan scan_at(const Pose2D& base, const WalkerModel& walker, const SimWorld& world, double time,
                  std::uint64_t step) {
  const RigidTransform world_to_laser = compose(invert(base_pose(base)), invert(world.laser_to_robot));
  Scene scene;
  scene.laser_to_robot = world.laser_to_robot;
  scene.seed = world.seed;
  scene.legs = walker.legs();
  for (auto& leg : scene.legs) leg.center = transform_point(leg.center, world_to_laser);
  LaserScan scan = cast_scan(scene, world.laser, step_seed(world.seed, step));
  scan.timestamp = time;
  scan.base = base;
  return scan;
}

SimState initial_state(const WalkerModel& walker, const SimWorld& world) {
  SimState s;
  s.walker = walker;
  s.scan = scan_at(s.base, walker, world, 0.0, 0);
  return s;
}

SimState closed_loop_step(const SimState& state, const VelocityCommand& cmd, double dt, const SimWorld& world) {
  if (!(dt > 0.0 && dt <= 0.1)) throw InvalidArgument("closed_loop_step: dt must be in (0, 0.1]");
  SimState next = state;
  const double c = std::cos(state.base.yaw), s = std::sin(state.base.yaw);
  next.base.x += (c * cmd.vx - s * cmd.vy) * dt;
  next.base.y += (s * cmd.vx + c * cmd.vy) * dt;
  next.base.yaw = std::remainder(state.base.yaw + cmd.omega * dt, 2.0 * M_PI);
  next.walker = step_walker(state.walker, dt).first;
  next.time = state.time + dt;
  next.step = state.step + 1;
  next.scan = scan_at(next.base, next.walker, world, next.time, next.step);
  return next;
}

VelocityEstimator::VelocityEstimator() : VelocityEstimator(Config{}) {}

VelocityEstimator::VelocityEstimator(Config cfg) : cfg_(cfg) {}

void VelocityEstimator::push(const LegObservation& obs) {
  if (!obs.valid) return;
  history_.push_back(obs);
  while (!history_.empty() && obs.timestamp - history_.front().timestamp > cfg_.gait_window) history_.pop_front();
}

std::optional<Point3> VelocityEstimator::last_midpoint() const {
  if (history_.empty()) return std::nullopt;
  return history_.back().midpoint();
}

std::optional<Point3> VelocityEstimator::velocity() const {
  if (history_.empty()) return std::nullopt;
  const double now = history_.back().timestamp;
  try {
    const std::vector<LegObservation> obs(history_.begin(), history_.end());
    const GaitReport r = estimate_gait(track_legs(obs, cfg_.tracker), cfg_.gait);
    double last = -1e300;
    for (const auto& f : r.feet)
      if (!f.stance_times.empty()) last = std::max(last, f.stance_times.back());
    // Stale strides (the person stopped) fall through to the direct fit.
    if (now - last <= 1.5 * r.stride_duration) return r.walking_velocity();
  } catch (const InsufficientData&) {
  }
  double tm = 0.0, xm = 0.0, ym = 0.0;
  int n = 0;
  for (const auto& o : history_) {
    if (now - o.timestamp > cfg_.fallback_window) continue;
    const Point3 m = o.midpoint();
    tm += o.timestamp;
    xm += m.x;
    ym += m.y;
    ++n;
  }
  if (n < 3) return std::nullopt;
  tm /= n;
  xm /= n;
  ym /= n;
  double stt = 0.0, stx = 0.0, sty = 0.0;
  for (const auto& o : history_) {
    if (now - o.timestamp > cfg_.fallback_window) continue;
    const Point3 m = o.midpoint();
    const double dt = o.timestamp - tm;
    stt += dt * dt;
    stx += dt * (m.x - xm);
    sty += dt * (m.y - ym);
  }
  if (!(stt > 0.0)) return std::nullopt;
  return Point3{stx / stt, sty / stt, 0.0};
}

FollowResult run_follow(const FollowConfig& cfg, const Segmenter& segmenter) {
  cfg.controller.validate();
  if (!(cfg.duration > 0.0)) throw InvalidArgument("follow duration must be > 0");
  const WalkerModel walker =
      WalkerModel::walking(-cfg.start_distance, 0.0, 0.0, cfg.walker_speed, cfg.walker_stride);
  SimState state = initial_state(walker, cfg.world);
  FollowController controller(cfg.controller);
  VelocityEstimator estimator(cfg.estimator);
  FollowResult result;
  const auto steps = static_cast<std::uint64_t>(std::llround(cfg.duration / cfg.dt));
  for (std::uint64_t k = 0; k < steps; ++k) {
    const LegObservation obs_r = perceive_legs(state.scan, segmenter, cfg.world.laser_to_robot, cfg.perception);
    const LegObservation obs_w = to_odometry_frame(obs_r, state.base);
    estimator.push(obs_w);

    VelocityCommand cmd;
    cmd.timestamp = state.time;
    std::optional<Point3> person;
    if (obs_r.valid) {
      person = obs_r.midpoint();
    } else if (auto m = estimator.last_midpoint()) {
      person = transform_point(*m, invert(base_pose(state.base)));
    }
    if (person) {
      const Point3 vw = estimator.velocity().value_or(Point3{});
      const double c = std::cos(state.base.yaw), s = std::sin(state.base.yaw);
      const Point3 vr{c * vw.x + s * vw.y, -s * vw.x + c * vw.y, 0.0};
      cmd = controller.compute(vr, *person, state.time);
    }
    result.trajectory.push_back({state.time, state.base, {state.walker.x, state.walker.y, 0.0}, cmd});
    result.scans.push_back(state.scan);
    result.observations.push_back(obs_w);
    state = closed_loop_step(state, cmd, cfg.dt, cfg.world);
  }
  return result;
}

std::string trajectory_record_to_json(const TrajectoryRecord& r) {
  nlohmann::ordered_json j;
  j["t"] = r.t;
  j["base"] = {r.base.x, r.base.y, r.base.yaw};
  j["person"] = {r.person.x, r.person.y};
  j["cmd"] = {r.cmd.vx, r.cmd.vy, r.cmd.omega};
  return j.dump();
}

}  // namespace mina
