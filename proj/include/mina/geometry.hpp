#pragma once

#include <Eigen/Core>
#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace mina {

enum class FrameId { Camera, Laser, RobotBase };

std::string_view frame_name(FrameId f);
/// Accepts "C"/"L"/"R" as well as "camera"/"laser"/"robot_base".
FrameId parse_frame(std::string_view s);

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const;
  double norm() const;
  friend bool operator==(const Point3&, const Point3&) = default;
};

Point3 operator+(const Point3& a, const Point3& b);
Point3 operator-(const Point3& a, const Point3& b);
Point3 operator*(double s, const Point3& a);
double distance(const Point3& a, const Point3& b);

/// Homogeneous 4x4 transform between two frames, row-vector convention:
/// a point is the row [x y z 1] and maps as [x y z 1] * M. The rotation block
/// sits in the upper-left 3x3, translation in the bottom row, and the last
/// column is [0 0 0 1]^T.
class RigidTransform {
 public:
  using Matrix = Eigen::Matrix4d;

  /// Validates orthonormality, det = +1 and the last column (1e-9).
  RigidTransform(const Matrix& m, FrameId source, FrameId target);

  static RigidTransform identity(FrameId source, FrameId target);
  static RigidTransform translation(double tx, double ty, double tz, FrameId source,
                                    FrameId target);
  /// Rotation by `yaw` about z, then translation (tx, ty, tz).
  static RigidTransform planar(double yaw, double tx, double ty, FrameId source,
                               FrameId target);

  const Matrix& matrix() const { return m_; }
  FrameId source() const { return source_; }
  FrameId target() const { return target_; }

  /// Rotation about z of the rotation block (meaningful for planar transforms).
  double yaw() const;
  Point3 translation_part() const;

 private:
  Matrix m_;
  FrameId source_;
  FrameId target_;
};

Point3 transform_point(const Point3& p, const RigidTransform& m);
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& m);

/// Largest absolute element difference between two transform matrices.
double max_abs_diff(const RigidTransform& a, const RigidTransform& b);

struct Keypoint3D {
  Point3 point;
  FrameId frame = FrameId::Camera;
  double timestamp = 0.0;
  std::string label;
  double confidence = 1.0;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const;
};

/// Pinhole deprojection of pixel (u, v) at `depth` meters into the camera frame.
Point3 deproject_pixel(double u, double v, double depth, const CameraIntrinsics& k);

struct PixelUV {
  double u = 0.0;
  double v = 0.0;
};

/// Forward pinhole projection; requires p.z > 0.
PixelUV project(const Point3& p, const CameraIntrinsics& k);

// Transform config files: {"source": "L", "target": "R", "matrix": [[4],[4],[4],[4]]}
RigidTransform transform_from_json_text(const std::string& text);
std::string transform_to_json_text(const RigidTransform& m);
/// Reads either a single transform object, an array of them, or an object with a
/// "transforms" array.
std::vector<RigidTransform> read_transforms(const std::string& path);
/// Finds `source -> target` in `transforms`, also accepting an inverted entry.
RigidTransform find_transform(const std::vector<RigidTransform>& transforms, FrameId source,
                              FrameId target);

}  // namespace mina
