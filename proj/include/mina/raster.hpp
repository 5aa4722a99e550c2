#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mina/geometry.hpp"

namespace mina {

/// Square grid centered on the laser, 1 cm per pixel.
struct GridSpec {
  int matrix_length = 256;

  /// Pixels per meter. Fixed by the x100 scale of the rasterizer.
  static constexpr double kPixelsPerMeter = 100.0;

  int l() const { return matrix_length / 2; }
  void validate() const;
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Binary occupancy image. Pixel (pixel_x, pixel_y) lives at row pixel_x,
/// column pixel_y; pixel_x grows along laser +x. Values are 0 or 255.
class OccupancyGrid {
 public:
  explicit OccupancyGrid(GridSpec spec = {});
  /// Validates size and that every byte is 0 or 255.
  OccupancyGrid(GridSpec spec, std::vector<std::uint8_t> pixels);

  const GridSpec& spec() const { return spec_; }
  int size() const { return spec_.matrix_length; }
  std::uint8_t at(int px, int py) const { return pixels_[index(px, py)]; }
  void set(int px, int py, bool occupied) { pixels_[index(px, py)] = occupied ? 255 : 0; }
  bool occupied(int px, int py) const { return at(px, py) != 0; }
  bool in_bounds(int px, int py) const {
    return px >= 0 && py >= 0 && px < size() && py < size();
  }
  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::size_t count_occupied() const;

  friend bool operator==(const OccupancyGrid&, const OccupancyGrid&) = default;

 private:
  std::size_t index(int px, int py) const {
    return static_cast<std::size_t>(px) * static_cast<std::size_t>(size()) +
           static_cast<std::size_t>(py);
  }
  GridSpec spec_;
  std::vector<std::uint8_t> pixels_;
};

/// Planar robot pose used for odometry: position (x, y) and heading.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

struct LaserScan {
  double timestamp = 0.0;
  double angle_min = 0.0;
  double angle_increment = 0.0;
  double range_max = 0.0;
  std::vector<double> ranges;
  /// Base pose in the odometry frame at scan time, when known.
  std::optional<Pose2D> base;

  double angle(std::size_t i) const {
    return angle_min + static_cast<double>(i) * angle_increment;
  }
  void validate() const;
};

struct PixelIndex {
  int px = 0;
  int py = 0;
  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
  friend auto operator<=>(const PixelIndex&, const PixelIndex&) = default;
};

/// Pixel a laser-frame point falls in, rounding half away from zero.
/// Returns nullopt outside [0, matrix_length).
std::optional<PixelIndex> pixel_of(double x, double y, const GridSpec& spec);

OccupancyGrid rasterize(const LaserScan& scan, const GridSpec& spec = {});

/// Inverse of the rasterizer's pixel map: ((px - l)/100, (py - l)/100, 0).
Point3 deproject_cell(double pixel_x, double pixel_y, const GridSpec& spec = {});

// Binary PGM: "P5\n<W> <H>\n255\n" then W*H bytes, rows indexed by pixel_x.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

void write_pgm(const std::string& path, const Image8& image);
/// Strict reader for the header form above; errors carry the byte offset.
Image8 read_pgm(const std::string& path);

void write_grid(const std::string& path, const OccupancyGrid& grid);
/// Rejects any pixel outside {0, 255}, citing its byte offset in the file.
OccupancyGrid read_grid(const std::string& path);

}  // namespace mina
