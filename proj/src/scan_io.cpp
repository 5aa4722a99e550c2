#include "mina/scan_io.hpp"

#include <fstream>

#include "json.hpp"
#include "mina/error.hpp"

namespace mina {

using json = nlohmann::json;

namespace {

double number_field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw FormatError(std::string("missing or non-numeric field '") + key + "'",
                      FormatError::Unit::Line, line);
  return j.at(key).get<double>();
}

}  // namespace

std::string scan_to_json_line(const LaserScan& scan) {
  json j = {{"t", scan.timestamp},
            {"angle_min", scan.angle_min},
            {"angle_inc", scan.angle_increment},
            {"range_max", scan.range_max},
            {"ranges", scan.ranges}};
  if (scan.base) j["base"] = {scan.base->x, scan.base->y, scan.base->yaw};
  return j.dump();
}

LaserScan scan_from_json_line(const std::string& line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what(), FormatError::Unit::Line,
                      line_number);
  }
  if (!j.is_object()) throw FormatError("scan must be a JSON object", FormatError::Unit::Line, line_number);
  LaserScan s;
  s.timestamp = number_field(j, "t", line_number);
  s.angle_min = number_field(j, "angle_min", line_number);
  s.angle_increment = number_field(j, "angle_inc", line_number);
  s.range_max = number_field(j, "range_max", line_number);
  if (!j.contains("ranges") || !j.at("ranges").is_array())
    throw FormatError("missing 'ranges' array", FormatError::Unit::Line, line_number);
  for (const auto& r : j.at("ranges")) {
    if (!r.is_number()) throw FormatError("non-numeric range", FormatError::Unit::Line, line_number);
    s.ranges.push_back(r.get<double>());
  }
  if (j.contains("base")) {
    const auto& b = j.at("base");
    if (!b.is_array() || b.size() != 3 || !b[0].is_number() || !b[1].is_number() ||
        !b[2].is_number())
      throw FormatError("'base' must be [x, y, yaw]", FormatError::Unit::Line, line_number);
    s.base = Pose2D{b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
  }
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(e.what(), FormatError::Unit::Line, line_number);
  }
  return s;
}

std::vector<LaserScan> read_scan_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open scan log '" + path + "'");
  std::vector<LaserScan> scans;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    scans.push_back(scan_from_json_line(line, n));
  }
  return scans;
}

void write_scan_log(const std::string& path, const std::vector<LaserScan>& scans) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  for (const auto& s : scans) out << scan_to_json_line(s) << '\n';
}

std::vector<PixelKeypoint> read_keypoint_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open keypoint log '" + path + "'");
  std::vector<PixelKeypoint> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(std::string("malformed JSON: ") + e.what(), FormatError::Unit::Line, n);
    }
    PixelKeypoint k;
    k.t = number_field(j, "t", n);
    k.u = number_field(j, "u", n);
    k.v = number_field(j, "v", n);
    k.depth = number_field(j, "depth", n);
    k.conf = number_field(j, "conf", n);
    if (!j.contains("label") || !j.at("label").is_string())
      throw FormatError("missing 'label'", FormatError::Unit::Line, n);
    k.label = j.at("label").get<std::string>();
    if (k.conf < 0.0 || k.conf > 1.0)
      throw FormatError("'conf' must lie in [0, 1]", FormatError::Unit::Line, n);
    if (!out.empty() && k.t < out.back().t)
      throw FormatError("keypoint timestamps must be non-decreasing", FormatError::Unit::Line, n);
    out.push_back(std::move(k));
  }
  return out;
}

std::string keypoint_to_json_line(const PixelKeypoint& k) {
  return json{{"t", k.t}, {"label", k.label}, {"u", k.u},
              {"v", k.v}, {"depth", k.depth}, {"conf", k.conf}}
      .dump();
}

}  // namespace mina
