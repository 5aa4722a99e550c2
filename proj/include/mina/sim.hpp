#pragma once

#include <array>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "mina/geometry.hpp"
#include "mina/raster.hpp"

namespace mina {

/// Scanner model. Defaults follow a UST-20LX class sensor: 270 degree field of
/// view at 0.25 degree steps.
struct LaserSpec {
  double angle_min = -135.0 * std::numbers::pi / 180.0;
  double angle_increment = 0.25 * std::numbers::pi / 180.0;
  int beam_count = 1081;
  double range_max = 20.0;
  double range_noise_sigma = 0.01;

  void validate() const;
};

/// Circular leg cross-section in the laser frame.
struct LegDisk {
  Point3 center;
  double radius = 0.06;

  void validate() const;
};

/// Oriented rectangle in the laser frame.
struct ClutterBox {
  double cx = 0.0;
  double cy = 0.0;
  double hx = 0.05;
  double hy = 0.05;
  double yaw = 0.0;

  void validate() const;
  double bounding_radius() const;
};

/// Walking person. Each foot follows a cycloid along the heading: it is at rest
/// once per stride and advances `stride_length` between rests.
struct WalkerModel {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double stride_length = 1.0;
  double cadence = 0.0;  // strides per second
  double half_separation = 0.10;
  double phase = 0.0;
  double leg_radius = 0.06;

  static WalkerModel standing(double x, double y, double heading, double half_separation = 0.10);
  /// Sets cadence = speed / stride_length.
  static WalkerModel walking(double x, double y, double heading, double speed,
                             double stride_length, double half_separation = 0.10,
                             double phase = 0.0);

  void validate() const;
  /// Foot-to-torso oscillation amplitude along the heading.
  double swing_amplitude() const;
  /// {left, right}: left is on the +90 degree side of the heading.
  std::array<LegDisk, 2> legs() const;
};

std::pair<WalkerModel, std::array<LegDisk, 2>> step_walker(const WalkerModel& model, double dt);

/// Rear scanner mounted 0.2 m behind the base origin, facing backwards.
RigidTransform default_laser_mount();

struct Scene {
  std::array<LegDisk, 2> legs{};
  std::vector<ClutterBox> clutter;
  RigidTransform laser_to_robot = default_laser_mount();
  std::uint64_t seed = 0;

  void validate(double range_max) const;
};

struct GroundTruth {
  std::array<Point3, 2> leg_centers{};
  /// Centroid of each leg's dilated hit pixels: where a perfect segmentation
  /// puts the leg blob. Sits a few cm in front of the disk center.
  std::array<Point3, 2> surface_centers{};
  OccupancyGrid mask;
  double stride_length = 0.0;
  double stride_velocity = 0.0;
};

/// What each beam hit first.
enum class HitKind : std::uint8_t { None, Leg0, Leg1, Clutter };

struct LabeledScan {
  LaserScan scan;
  std::vector<HitKind> hits;
};

/// Exact nearest intersection along a ray from the origin, or a negative value.
double ray_circle(double angle, const LegDisk& disk);
double ray_box(double angle, const ClutterBox& box);

LabeledScan cast_scan_labeled(const Scene& scene, const LaserSpec& spec, std::uint64_t rng_seed,
                              double timestamp = 0.0);
LaserScan cast_scan(const Scene& scene, const LaserSpec& spec, std::uint64_t rng_seed);

/// Transformation applied to scan endpoints before rasterization. Rotation and
/// flip act on beam angles; the shift moves whole pixels.
struct Augmentation {
  double rotation = 0.0;
  bool flip = false;
  int shift_x = 0;
  int shift_y = 0;
};

/// Occupancy grid and leg mask of one labeled scan. The mask holds the leg-hit
/// pixels dilated by one pixel (3x3).
std::pair<OccupancyGrid, OccupancyGrid> rasterize_labeled(const LabeledScan& labeled,
                                                          const GridSpec& grid = {},
                                                          const Augmentation& aug = {});

/// Per-leg centroid of the dilated leg-hit pixels, deprojected to the laser
/// frame. Falls back to the disk center when a leg has no hits.
std::array<Point3, 2> leg_surface_centers(const LabeledScan& labeled, const std::array<LegDisk, 2>& legs,
                                          const GridSpec& grid = {});

struct ProtocolConfig {
  std::array<double, 3> distances{0.5, 0.8, 1.1};
  std::array<double, 3> lateral_offsets{-0.3, 0.0, 0.3};
  int scenario1_min_boxes = 0;
  int scenario1_max_boxes = 2;
  int scenario2_min_boxes = 6;
  int scenario2_max_boxes = 8;
  /// Boxes per cluttered trial placed right next to the person.
  int scenario2_near_leg_boxes = 1;
  LaserSpec laser;
  GridSpec grid;
};

struct Trial {
  int scenario = 1;  // 1 = light clutter, 2 = heavy clutter
  int location = 1;  // 1..9, row-major over (distance, lateral offset)
  Scene scene;
  GroundTruth truth;
};

/// 9 standing locations x 2 scenarios, scenario-major. Trial k is seeded from
/// (seed, k) so trials can be generated independently.
std::vector<Trial> gen_protocol_trials(std::uint64_t seed, const ProtocolConfig& cfg = {});
/// Scan of one protocol trial (same noise as its ground-truth mask).
LaserScan trial_scan(const Trial& trial, const LaserSpec& spec = {});

struct TrainingSetConfig {
  int max_boxes = 8;
  bool random_rotation = true;
  bool random_flip = true;
  int max_shift = 10;
  LaserSpec laser;
  GridSpec grid;
};

struct TrainingPair {
  OccupancyGrid grid;
  OccupancyGrid mask;
};

std::vector<TrainingPair> gen_training_set(int n, std::uint64_t seed,
                                           const TrainingSetConfig& cfg = {});

}  // namespace mina
