#pragma once

#include <string>
#include <vector>

#include "mina/raster.hpp"

namespace mina {

// Scan log: JSON Lines, one scan per line:
//   {"t": s, "angle_min": rad, "angle_inc": rad, "range_max": m, "ranges": [m, ...]}
// with an optional "base": [x, y, yaw] odometry pose.
std::string scan_to_json_line(const LaserScan& scan);
/// `line_number` is only used for error reporting.
LaserScan scan_from_json_line(const std::string& line, std::size_t line_number = 1);
/// Errors name the 1-based line that failed; nothing is returned on error.
std::vector<LaserScan> read_scan_log(const std::string& path);
void write_scan_log(const std::string& path, const std::vector<LaserScan>& scans);

/// One camera keypoint before deprojection.
struct PixelKeypoint {
  double t = 0.0;
  std::string label;
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  double conf = 0.0;
};

// Keypoint stream: {"t": s, "label": str, "u": px, "v": px, "depth": m, "conf": [0,1]}
std::vector<PixelKeypoint> read_keypoint_log(const std::string& path);
std::string keypoint_to_json_line(const PixelKeypoint& k);

}  // namespace mina
