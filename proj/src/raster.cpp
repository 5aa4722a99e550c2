#include "mina/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "mina/error.hpp"

namespace mina {

void GridSpec::validate() const {
  if (matrix_length < 64 || matrix_length % 2 != 0)
    throw InvalidArgument("grid matrix_length must be even and >= 64, got " +
                          std::to_string(matrix_length));
}

OccupancyGrid::OccupancyGrid(GridSpec spec) : spec_(spec) {
  spec_.validate();
  pixels_.assign(static_cast<std::size_t>(size()) * size(), 0);
}

OccupancyGrid::OccupancyGrid(GridSpec spec, std::vector<std::uint8_t> pixels)
    : spec_(spec), pixels_(std::move(pixels)) {
  spec_.validate();
  if (pixels_.size() != static_cast<std::size_t>(size()) * size())
    throw ShapeError("occupancy grid needs " + std::to_string(size() * size()) +
                     " pixels, got " + std::to_string(pixels_.size()));
  for (std::size_t i = 0; i < pixels_.size(); ++i)
    if (pixels_[i] != 0 && pixels_[i] != 255)
      throw InvalidArgument("occupancy grid pixel " + std::to_string(i) + " has value " +
                            std::to_string(pixels_[i]));
}

std::size_t OccupancyGrid::count_occupied() const {
  return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), 255));
}

void LaserScan::validate() const {
  if (!(angle_increment > 0.0) || !std::isfinite(angle_increment))
    throw InvalidArgument("scan angle_increment must be > 0");
  if (!(range_max > 0.0) || !std::isfinite(range_max))
    throw InvalidArgument("scan range_max must be > 0");
  if (!std::isfinite(angle_min) || !std::isfinite(timestamp))
    throw InvalidArgument("scan angle_min/timestamp must be finite");
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const double r = ranges[i];
    if (!std::isfinite(r) || r < 0.0 || r > range_max)
      throw InvalidArgument("scan range " + std::to_string(i) + " = " + std::to_string(r) +
                            " outside [0, range_max]");
  }
}

std::optional<PixelIndex> pixel_of(double x, double y, const GridSpec& spec) {
  const double l = spec.l();
  const double fx = std::round(x * GridSpec::kPixelsPerMeter + l);
  const double fy = std::round(y * GridSpec::kPixelsPerMeter + l);
  if (!(fx >= 0.0 && fx < spec.matrix_length && fy >= 0.0 && fy < spec.matrix_length))
    return std::nullopt;
  return PixelIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

OccupancyGrid rasterize(const LaserScan& scan, const GridSpec& spec) {
  scan.validate();
  OccupancyGrid grid(spec);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double d = scan.ranges[i];
    if (d >= scan.range_max) continue;  // no return
    const double a = scan.angle(i);
    if (auto p = pixel_of(d * std::cos(a), d * std::sin(a), spec)) grid.set(p->px, p->py, true);
  }
  return grid;
}

Point3 deproject_cell(double pixel_x, double pixel_y, const GridSpec& spec) {
  if (!(pixel_x >= 0.0 && pixel_x < spec.matrix_length && pixel_y >= 0.0 &&
        pixel_y < spec.matrix_length))
    throw InvalidArgument("deproject_cell: pixel (" + std::to_string(pixel_x) + ", " +
                          std::to_string(pixel_y) + ") outside the grid");
  const double l = spec.l();
  return {(pixel_x - l) / GridSpec::kPixelsPerMeter, (pixel_y - l) / GridSpec::kPixelsPerMeter,
          0.0};
}

void write_pgm(const std::string& path, const Image8& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
    throw ShapeError("write_pgm: pixel buffer does not match width x height");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw InvalidArgument("failed writing '" + path + "'");
}

namespace {

using Bytes = std::vector<std::uint8_t>;

// Parses a decimal integer terminated by `stop` starting at `pos`.
int parse_header_int(const Bytes& b, std::size_t& pos, char stop) {
  const std::size_t start = pos;
  long value = 0;
  while (pos < b.size() && b[pos] >= '0' && b[pos] <= '9') {
    value = value * 10 + (b[pos] - '0');
    if (value > 1'000'000) throw FormatError("PGM header number too large", FormatError::Unit::Byte, start);
    ++pos;
  }
  if (pos == start) throw FormatError("PGM header: expected a number", FormatError::Unit::Byte, pos);
  if (pos >= b.size() || b[pos] != static_cast<std::uint8_t>(stop))
    throw FormatError("PGM header: unexpected character", FormatError::Unit::Byte, pos);
  ++pos;
  return static_cast<int>(value);
}

}  // namespace

Image8 read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  const Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (b.size() < 3 || b[0] != 'P' || b[1] != '5' || b[2] != '\n')
    throw FormatError("not a binary PGM: expected \"P5\\n\"", FormatError::Unit::Byte, 0);
  std::size_t pos = 3;
  Image8 img;
  img.width = parse_header_int(b, pos, ' ');
  img.height = parse_header_int(b, pos, '\n');
  const std::size_t maxval_at = pos;
  if (parse_header_int(b, pos, '\n') != 255)
    throw FormatError("PGM maxval must be 255", FormatError::Unit::Byte, maxval_at);
  if (img.width <= 0 || img.height <= 0)
    throw FormatError("PGM dimensions must be positive", FormatError::Unit::Byte, 3);
  const std::size_t expected = static_cast<std::size_t>(img.width) * img.height;
  if (b.size() - pos < expected)
    throw FormatError("PGM truncated: expected " + std::to_string(expected) + " pixel bytes",
                      FormatError::Unit::Byte, b.size());
  if (b.size() - pos > expected)
    throw FormatError("PGM has trailing bytes", FormatError::Unit::Byte, pos + expected);
  img.pixels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.end());
  return img;
}

void write_grid(const std::string& path, const OccupancyGrid& grid) {
  write_pgm(path, Image8{grid.size(), grid.size(), grid.pixels()});
}

OccupancyGrid read_grid(const std::string& path) {
  Image8 img = read_pgm(path);
  if (img.width != img.height)
    throw FormatError("occupancy grid must be square, got " + std::to_string(img.width) + "x" +
                          std::to_string(img.height),
                      FormatError::Unit::Byte, 3);
  GridSpec spec{img.width};
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), FormatError::Unit::Byte, 3);
  }
  const std::size_t header = std::to_string(img.width).size() + std::to_string(img.height).size() + 9;
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    if (img.pixels[i] != 0 && img.pixels[i] != 255)
      throw FormatError("grid pixel value " + std::to_string(img.pixels[i]) + " is not 0 or 255",
                        FormatError::Unit::Byte, header + i);
  return OccupancyGrid(spec, std::move(img.pixels));
}

}  // namespace mina
