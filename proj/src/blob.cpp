#include "mina/blob.hpp"

#include <algorithm>
#include <cmath>

#include "mina/error.hpp"

namespace mina {

std::vector<Blob> connected_components(const SegmentationMask& mask, float tau) {
  const int n = mask.size;
  if (n <= 0 || mask.prob.size() != static_cast<std::size_t>(n) * n)
    throw ShapeError("connected_components: mask buffer does not match its size");
  std::vector<char> seen(mask.prob.size(), 0);
  std::vector<Blob> blobs;
  std::vector<PixelIndex> stack;
  for (int px = 0; px < n; ++px)
    for (int py = 0; py < n; ++py) {
      const std::size_t idx = static_cast<std::size_t>(px) * n + py;
      if (seen[idx] || mask.prob[idx] < tau) continue;
      Blob blob;
      seen[idx] = 1;
      stack.push_back({px, py});
      while (!stack.empty()) {
        const PixelIndex p = stack.back();
        stack.pop_back();
        blob.pixels.push_back(p);
        for (int dx = -1; dx <= 1; ++dx)
          for (int dy = -1; dy <= 1; ++dy) {
            const int qx = p.px + dx, qy = p.py + dy;
            if (qx < 0 || qy < 0 || qx >= n || qy >= n) continue;
            const std::size_t q = static_cast<std::size_t>(qx) * n + qy;
            if (seen[q] || mask.prob[q] < tau) continue;
            seen[q] = 1;
            stack.push_back({qx, qy});
          }
      }
      std::sort(blob.pixels.begin(), blob.pixels.end());
      blob.area = blob.pixels.size();
      double sx = 0.0, sy = 0.0;
      for (const auto& p : blob.pixels) {
        sx += p.px;
        sy += p.py;
      }
      blob.cx = sx / static_cast<double>(blob.area);
      blob.cy = sy / static_cast<double>(blob.area);
      blobs.push_back(std::move(blob));
    }
  std::stable_sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) {
    if (a.area != b.area) return a.area > b.area;
    return a.pixels.front() < b.pixels.front();
  });
  return blobs;
}

std::string_view status_reason(ObservationStatus s) {
  switch (s) {
    case ObservationStatus::Valid:
      return "ok";
    case ObservationStatus::NoLegs:
      return "too few leg-sized blobs";
    case ObservationStatus::AmbiguousCount:
      return "ambiguous count";
    case ObservationStatus::SeparationOutOfRange:
      return "separation out of range";
    case ObservationStatus::NoCameraConfirmation:
      return "no camera confirmation";
  }
  return "unknown";
}

LegObservation extract_leg_midpoints(const std::vector<Blob>& blobs, const GridSpec& spec,
                                     const LegFilter& filter, double timestamp) {
  LegObservation obs;
  obs.timestamp = timestamp;
  obs.frame = FrameId::Laser;
  std::vector<const Blob*> legs;
  for (const auto& b : blobs)
    if (filter.leg_sized(b)) legs.push_back(&b);
  if (legs.size() < 2) {
    obs.status = ObservationStatus::NoLegs;
    return obs;
  }
  if (legs.size() > 2) {
    obs.status = ObservationStatus::AmbiguousCount;
    return obs;
  }
  Point3 a = deproject_cell(legs[0]->cx, legs[0]->cy, spec);
  Point3 b = deproject_cell(legs[1]->cx, legs[1]->cy, spec);
  if (a.y < b.y) std::swap(a, b);
  obs.left = a;
  obs.right = b;
  const double sep = distance(a, b);
  if (sep < filter.min_separation || sep > filter.max_separation) {
    obs.status = ObservationStatus::SeparationOutOfRange;
    return obs;
  }
  obs.valid = true;
  obs.status = ObservationStatus::Valid;
  return obs;
}

LegObservation to_robot_frame(const LegObservation& obs, const RigidTransform& laser_to_robot) {
  if (obs.frame != laser_to_robot.source())
    throw FrameMismatch("to_robot_frame: observation is in frame " + std::string(frame_name(obs.frame)) +
                        " but the transform starts in " + std::string(frame_name(laser_to_robot.source())));
  if (laser_to_robot.target() != FrameId::RobotBase)
    throw FrameMismatch("to_robot_frame: transform must end in the robot base frame");
  LegObservation out = obs;
  out.frame = FrameId::RobotBase;
  if (obs.valid) {
    out.left = transform_point(obs.left, laser_to_robot);
    out.right = transform_point(obs.right, laser_to_robot);
  }
  return out;
}

LegObservation to_odometry_frame(const LegObservation& obs, const Pose2D& base) {
  if (obs.frame != FrameId::RobotBase)
    throw FrameMismatch("to_odometry_frame: observation must be in the robot base frame");
  const auto pose = RigidTransform::planar(base.yaw, base.x, base.y, FrameId::RobotBase, FrameId::RobotBase);
  LegObservation out = obs;
  if (obs.valid) {
    out.left = transform_point(obs.left, pose);
    out.right = transform_point(obs.right, pose);
  }
  return out;
}

std::vector<Keypoint3D> keypoints_to_robot_frame(const std::vector<PixelKeypoint>& keypoints,
                                                 const CameraIntrinsics& intrinsics,
                                                 const RigidTransform& camera_to_robot) {
  if (camera_to_robot.source() != FrameId::Camera || camera_to_robot.target() != FrameId::RobotBase)
    throw FrameMismatch("keypoints_to_robot_frame: transform must map C to R");
  std::vector<Keypoint3D> out;
  out.reserve(keypoints.size());
  for (const auto& k : keypoints) {
    const Point3 pc = deproject_pixel(k.u, k.v, k.depth, intrinsics);
    out.push_back({transform_point(pc, camera_to_robot), FrameId::RobotBase, k.t, k.label, k.conf});
  }
  return out;
}

LegObservation apply_camera_gate(const LegObservation& obs, const std::vector<Keypoint3D>& keypoints,
                                 const CameraGate& gate) {
  if (!obs.valid) return obs;
  if (obs.frame != FrameId::RobotBase)
    throw FrameMismatch("apply_camera_gate: observation must be in the robot base frame");
  const Point3 mid = obs.midpoint();
  for (const auto& k : keypoints) {
    if (k.frame != FrameId::RobotBase)
      throw FrameMismatch("apply_camera_gate: keypoints must be in the robot base frame");
    if (std::abs(k.timestamp - obs.timestamp) > gate.time_window) continue;
    if (k.confidence < gate.min_confidence) continue;
    if (std::hypot(k.point.x - mid.x, k.point.y - mid.y) <= gate.max_horizontal_offset) return obs;
  }
  LegObservation out = obs;
  out.valid = false;
  out.status = ObservationStatus::NoCameraConfirmation;
  return out;
}

LegObservation perceive_legs(const LaserScan& scan, const Segmenter& segmenter,
                             const RigidTransform& laser_to_robot, const PerceptionConfig& cfg) {
  const OccupancyGrid grid = rasterize(scan, cfg.grid);
  const SegmentationMask mask = segmenter(grid);
  const LegObservation obs =
      extract_leg_midpoints(connected_components(mask), cfg.grid, cfg.filter, scan.timestamp);
  return to_robot_frame(obs, laser_to_robot);
}

}  // namespace mina
