#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mina/blob.hpp"
#include "mina/gait.hpp"
#include "mina/sim.hpp"

namespace mina {

struct VelocityCommand {
  double vx = 0.0;  // m/s in R
  double vy = 0.0;
  double omega = 0.0;  // rad/s
  double timestamp = 0.0;
};

struct ControllerConfig {
  double gain = 1.0;           // on walking velocity
  double standoff_gain = 1.0;  // 1/s, on distance error
  double deadband = 0.02;      // m/s
  double distance_tolerance = 0.02;  // m, equilibrium band used with the deadband
  double v_max = 0.8;
  double omega_max = 0.5;
  double heading_gain = 1.0;  // 1/s
  double alpha = 0.5;         // low-pass coefficient in (0, 1]
  double standoff = 0.6;      // m

  void validate() const;
};

/// Proportional-plus-standoff follower with first-order smoothing.
class FollowController {
 public:
  explicit FollowController(ControllerConfig cfg = {});

  /// `walking_velocity` and `person` are both expressed in R.
  VelocityCommand compute(const Point3& walking_velocity, const Point3& person, double timestamp = 0.0);
  void reset();
  const ControllerConfig& config() const { return cfg_; }

 private:
  ControllerConfig cfg_;
  double fx_ = 0.0, fy_ = 0.0;
  bool primed_ = false;
};

/// One-shot command from a fresh controller.
VelocityCommand compute_command(const Point3& walking_velocity, const Point3& person,
                                const ControllerConfig& cfg = {});

struct SimState {
  double time = 0.0;
  std::uint64_t step = 0;
  Pose2D base;  // world frame, equal to the odometry frame
  WalkerModel walker;
  LaserScan scan;  // rear scan at `time`, carrying the base pose
};

struct SimWorld {
  LaserSpec laser;
  RigidTransform laser_to_robot = default_laser_mount();
  std::uint64_t seed = 0;
};

/// Walker legs seen from the scanner at the given base pose.
LaserScan scan_at(const Pose2D& base, const WalkerModel& walker, const SimWorld& world, double time,
                  std::uint64_t step);

SimState initial_state(const WalkerModel& walker, const SimWorld& world);

/// Integrates the base under the command (omnidirectional), steps the
/// walker and emits the next scan. dt must be in (0, 0.1].
SimState closed_loop_step(const SimState& state, const VelocityCommand& cmd, double dt, const SimWorld& world);

/// Estimates walking velocity in the odometry frame from recent observations:
/// stride velocity when at least two strides are visible, otherwise a linear
/// fit of the leg midpoint.
class VelocityEstimator {
 public:
  struct Config {
    double gait_window = 6.0;      // s
    double fallback_window = 1.0;  // s
    GaitConfig gait;
    TrackerConfig tracker;
  };

  VelocityEstimator();
  explicit VelocityEstimator(Config cfg);

  void push(const LegObservation& obs_in_odometry);
  std::optional<Point3> velocity() const;
  std::optional<Point3> last_midpoint() const;

 private:
  Config cfg_;
  std::deque<LegObservation> history_;
};

struct FollowConfig {
  double walker_speed = 0.5;
  double walker_stride = 1.0;
  double duration = 30.0;
  double dt = 0.05;
  double start_distance = 0.6;  // person behind the base, m
  ControllerConfig controller;
  SimWorld world;
  PerceptionConfig perception;
  VelocityEstimator::Config estimator;
};

struct TrajectoryRecord {
  double t = 0.0;
  Pose2D base;
  Point3 person;  // ground-truth torso, world frame
  VelocityCommand cmd;
};

struct FollowResult {
  std::vector<TrajectoryRecord> trajectory;
  std::vector<LaserScan> scans;
  std::vector<LegObservation> observations;  // odometry frame
};

FollowResult run_follow(const FollowConfig& cfg, const Segmenter& segmenter);

std::string trajectory_record_to_json(const TrajectoryRecord& r);

}  // namespace mina
