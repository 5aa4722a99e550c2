#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "mina/geometry.hpp"
#include "mina/raster.hpp"
#include "mina/scan_io.hpp"
#include "mina/unet.hpp"

namespace mina {

struct Blob {
  std::vector<PixelIndex> pixels;  // sorted lexicographically
  std::size_t area = 0;
  double cx = 0.0;  // mean pixel_x
  double cy = 0.0;  // mean pixel_y
};

/// 8-connected components of {p >= tau}, largest first; equal areas are
/// ordered by their lexicographically smallest pixel.
std::vector<Blob> connected_components(const SegmentationMask& mask, float tau);
inline std::vector<Blob> connected_components(const SegmentationMask& mask) {
  return connected_components(mask, mask.threshold);
}

/// Leg plausibility bands. Closed intervals.
struct LegFilter {
  std::size_t min_area = 4;
  std::size_t max_area = 400;
  double min_separation = 0.05;
  double max_separation = 0.60;

  bool leg_sized(const Blob& b) const { return b.area >= min_area && b.area <= max_area; }
};

enum class ObservationStatus {
  Valid,
  NoLegs,
  AmbiguousCount,
  SeparationOutOfRange,
  NoCameraConfirmation,
};

std::string_view status_reason(ObservationStatus s);

struct LegObservation {
  Point3 left;   // larger laser-frame y
  Point3 right;
  FrameId frame = FrameId::Laser;
  double timestamp = 0.0;
  bool valid = false;
  ObservationStatus status = ObservationStatus::NoLegs;

  Point3 midpoint() const { return 0.5 * (left + right); }
};

/// Blob midpoints deprojected into the laser frame. Valid only when exactly
/// two leg-sized blobs remain and their separation is inside the band.
LegObservation extract_leg_midpoints(const std::vector<Blob>& blobs, const GridSpec& spec = {},
                                     const LegFilter& filter = {}, double timestamp = 0.0);

/// Laser-frame observation into the robot base frame.
LegObservation to_robot_frame(const LegObservation& obs, const RigidTransform& laser_to_robot);

/// Base-frame observation into the fixed frame of the start pose, given the
/// odometry pose of the base at observation time.
LegObservation to_odometry_frame(const LegObservation& obs, const Pose2D& base);

/// Camera branch: keypoints deprojected and moved into the base frame.
std::vector<Keypoint3D> keypoints_to_robot_frame(const std::vector<PixelKeypoint>& keypoints,
                                                 const CameraIntrinsics& intrinsics,
                                                 const RigidTransform& camera_to_robot);

/// Upper-body presence gate: a valid observation stays valid only if a
/// confident camera keypoint near its time stamp lies horizontally close to
/// the legs.
struct CameraGate {
  double time_window = 0.25;
  double min_confidence = 0.5;
  double max_horizontal_offset = 0.6;
};

LegObservation apply_camera_gate(const LegObservation& obs_in_robot,
                                 const std::vector<Keypoint3D>& keypoints_in_robot,
                                 const CameraGate& gate = {});

using Segmenter = std::function<SegmentationMask(const OccupancyGrid&)>;

struct PerceptionConfig {
  GridSpec grid;
  LegFilter filter;
};

/// scan -> grid -> mask -> blobs -> midpoints (laser frame) -> base frame.
LegObservation perceive_legs(const LaserScan& scan, const Segmenter& segmenter,
                             const RigidTransform& laser_to_robot, const PerceptionConfig& cfg = {});

}  // namespace mina
