#include "mina/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mina/error.hpp"

namespace mina {

namespace {

constexpr double kTol = 1e-9;

using json = nlohmann::json;

bool finite_matrix(const RigidTransform::Matrix& m) { return m.allFinite(); }

}  // namespace

std::string_view frame_name(FrameId f) {
  switch (f) {
    case FrameId::Camera:
      return "C";
    case FrameId::Laser:
      return "L";
    case FrameId::RobotBase:
      return "R";
  }
  return "?";
}

FrameId parse_frame(std::string_view s) {
  if (s == "C" || s == "camera") return FrameId::Camera;
  if (s == "L" || s == "laser") return FrameId::Laser;
  if (s == "R" || s == "robot_base") return FrameId::RobotBase;
  throw InvalidArgument("unknown frame '" + std::string(s) + "'");
}

bool Point3::finite() const {
  return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

double Point3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Point3 operator*(double s, const Point3& a) { return {s * a.x, s * a.y, s * a.z}; }
double distance(const Point3& a, const Point3& b) { return (a - b).norm(); }

RigidTransform::RigidTransform(const Matrix& m, FrameId source, FrameId target)
    : m_(m), source_(source), target_(target) {
  if (!finite_matrix(m)) throw InvalidArgument("transform matrix has non-finite entries");
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if (((r.transpose() * r) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > kTol)
    throw InvalidArgument("rotation block is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > kTol)
    throw InvalidArgument("rotation block determinant is not +1");
  if (std::abs(m(0, 3)) > kTol || std::abs(m(1, 3)) > kTol || std::abs(m(2, 3)) > kTol ||
      std::abs(m(3, 3) - 1.0) > kTol)
    throw InvalidArgument("last column of a row-vector transform must be [0 0 0 1]");
}

RigidTransform RigidTransform::identity(FrameId source, FrameId target) {
  return {Matrix::Identity(), source, target};
}

RigidTransform RigidTransform::translation(double tx, double ty, double tz, FrameId source,
                                           FrameId target) {
  Matrix m = Matrix::Identity();
  m(3, 0) = tx;
  m(3, 1) = ty;
  m(3, 2) = tz;
  return {m, source, target};
}

RigidTransform RigidTransform::planar(double yaw, double tx, double ty, FrameId source,
                                      FrameId target) {
  // Row-vector form of the column rotation Rz(yaw) is its transpose.
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  Matrix m = Matrix::Identity();
  m(0, 0) = c;
  m(0, 1) = s;
  m(1, 0) = -s;
  m(1, 1) = c;
  m(3, 0) = tx;
  m(3, 1) = ty;
  return {m, source, target};
}

double RigidTransform::yaw() const { return std::atan2(m_(0, 1), m_(0, 0)); }

Point3 RigidTransform::translation_part() const { return {m_(3, 0), m_(3, 1), m_(3, 2)}; }

Point3 transform_point(const Point3& p, const RigidTransform& m) {
  if (!p.finite()) throw InvalidArgument("transform_point: point has non-finite coordinates");
  const Eigen::RowVector4d row(p.x, p.y, p.z, 1.0);
  const Eigen::RowVector4d out = row * m.matrix();
  return {out(0) / out(3), out(1) / out(3), out(2) / out(3)};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (a.target() != b.source()) {
    throw FrameMismatch("compose: first transform ends in frame " +
                        std::string(frame_name(a.target())) + " but second starts in frame " +
                        std::string(frame_name(b.source())));
  }
  RigidTransform::Matrix m = a.matrix() * b.matrix();
  // Re-orthonormalize to stop drift across long chains.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m.topLeftCorner<3, 3>(),
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  m.topLeftCorner<3, 3>() = svd.matrixU() * svd.matrixV().transpose();
  return {m, a.source(), b.target()};
}

RigidTransform invert(const RigidTransform& m) {
  const Eigen::Matrix3d r = m.matrix().topLeftCorner<3, 3>();
  const Eigen::RowVector3d t = m.matrix().bottomLeftCorner<1, 3>();
  RigidTransform::Matrix out = RigidTransform::Matrix::Identity();
  out.topLeftCorner<3, 3>() = r.transpose();
  out.bottomLeftCorner<1, 3>() = -t * r.transpose();
  return {out, m.target(), m.source()};
}

double max_abs_diff(const RigidTransform& a, const RigidTransform& b) {
  return (a.matrix() - b.matrix()).cwiseAbs().maxCoeff();
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("camera focal lengths must be > 0");
  if (width <= 0 || height <= 0) throw InvalidArgument("camera image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
    throw InvalidArgument("principal point outside the image");
}

Point3 deproject_pixel(double u, double v, double depth, const CameraIntrinsics& k) {
  k.validate();
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw InvalidDepth("deproject_pixel: depth must be a finite positive value, got " +
                       std::to_string(depth));
  if (!(u >= 0.0 && u < k.width && v >= 0.0 && v < k.height))
    throw InvalidArgument("deproject_pixel: pixel outside the image");
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

PixelUV project(const Point3& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0)) throw InvalidDepth("project: point must lie in front of the camera");
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

namespace {

RigidTransform transform_from_json(const json& j) {
  if (!j.is_object() || !j.contains("source") || !j.contains("target") || !j.contains("matrix"))
    throw InvalidArgument("transform config needs 'source', 'target' and 'matrix'");
  const auto& rows = j.at("matrix");
  if (!rows.is_array() || rows.size() != 4)
    throw InvalidArgument("transform matrix must have 4 rows");
  RigidTransform::Matrix m;
  for (int r = 0; r < 4; ++r) {
    if (!rows[r].is_array() || rows[r].size() != 4)
      throw InvalidArgument("transform matrix row " + std::to_string(r) + " must have 4 entries");
    for (int c = 0; c < 4; ++c) m(r, c) = rows[r][c].get<double>();
  }
  return {m, parse_frame(j.at("source").get<std::string>()),
          parse_frame(j.at("target").get<std::string>())};
}

json transform_to_json(const RigidTransform& t) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) {
    json row = json::array();
    for (int c = 0; c < 4; ++c) row.push_back(t.matrix()(r, c));
    rows.push_back(row);
  }
  return {{"source", std::string(frame_name(t.source()))},
          {"target", std::string(frame_name(t.target()))},
          {"matrix", rows}};
}

}  // namespace

RigidTransform transform_from_json_text(const std::string& text) {
  try {
    return transform_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("bad transform config: ") + e.what());
  }
}

std::string transform_to_json_text(const RigidTransform& m) { return transform_to_json(m).dump(); }

std::vector<RigidTransform> read_transforms(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open transform config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::vector<RigidTransform> out;
  try {
    const json j = json::parse(ss.str());
    const json* list = &j;
    if (j.is_object() && j.contains("transforms")) list = &j.at("transforms");
    if (list->is_array()) {
      for (const auto& item : *list) out.push_back(transform_from_json(item));
    } else {
      out.push_back(transform_from_json(*list));
    }
  } catch (const json::exception& e) {
    throw InvalidArgument("bad transform config '" + path + "': " + e.what());
  }
  return out;
}

RigidTransform find_transform(const std::vector<RigidTransform>& transforms, FrameId source,
                              FrameId target) {
  for (const auto& t : transforms)
    if (t.source() == source && t.target() == target) return t;
  for (const auto& t : transforms)
    if (t.source() == target && t.target() == source) return invert(t);
  throw InvalidArgument("no transform from " + std::string(frame_name(source)) + " to " +
                        std::string(frame_name(target)));
}

}  // namespace mina
