#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"
#include "mina/error.hpp"
#include "mina/geometry.hpp"
#include "mina/sim.hpp"

using namespace mina;

namespace {

using M4 = std::array<std::array<double, 4>, 4>;

M4 to_array(const RigidTransform& t) {
  M4 a{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) a[r][c] = t.matrix()(r, c);
  return a;
}

// Plain triple loop, independent of Eigen.
M4 hand_multiply(const M4& a, const M4& b) {
  M4 out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a[r][k] * b[k][c];
      out[r][c] = s;
    }
  return out;
}

Point3 hand_apply(const Point3& p, const M4& m) {
  const double row[4] = {p.x, p.y, p.z, 1.0};
  double out[4] = {0, 0, 0, 0};
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < 4; ++k) out[c] += row[k] * m[k][c];
  return {out[0] / out[3], out[1] / out[3], out[2] / out[3]};
}

RigidTransform random_rigid(std::mt19937_64& rng, FrameId s, FrameId t) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  const Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
  const Eigen::Matrix3d r = quat.toRotationMatrix();
  RigidTransform::Matrix m = RigidTransform::Matrix::Identity();
  m.block<3, 3>(0, 0) = r.transpose();
  m(3, 0) = n(rng);
  m(3, 1) = n(rng);
  m(3, 2) = n(rng);
  return RigidTransform(m, s, t);
}

}  // namespace

TEST_CASE("identity and translation") {
  const auto id = RigidTransform::identity(FrameId::Laser, FrameId::RobotBase);
  CHECK(transform_point({1, 2, 3}, id) == Point3{1, 2, 3});
  const auto t = RigidTransform::translation(0.5, 0, 0, FrameId::Laser, FrameId::RobotBase);
  CHECK(transform_point({1, 0, 0}, t) == Point3{1.5, 0, 0});
  CHECK_THROWS_AS(transform_point({NAN, 0, 0}, id), InvalidArgument);
}

TEST_CASE("laser mount against a hand product") {
  const auto m = default_laser_mount();
  const Point3 p{0.40, -0.12, 0.0};
  const Point3 got = transform_point(p, m);
  const Point3 want = hand_apply(p, to_array(m));
  CHECK(std::abs(got.x - want.x) < 1e-12);
  CHECK(std::abs(got.y - want.y) < 1e-12);
  // Rear scanner: a point 0.4 m in front of the laser is 0.6 m behind the base.
  CHECK(std::abs(got.x - (-0.6)) < 1e-12);
  CHECK(std::abs(got.y - 0.12) < 1e-12);
}

TEST_CASE("compose matches the hand product and the sequential application") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_rigid(rng, FrameId::Laser, FrameId::RobotBase);
    const auto b = random_rigid(rng, FrameId::RobotBase, FrameId::Camera);
    const auto ab = compose(a, b);
    CHECK(ab.source() == FrameId::Laser);
    CHECK(ab.target() == FrameId::Camera);
    const M4 want = hand_multiply(to_array(a), to_array(b));
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) CHECK(std::abs(ab.matrix()(r, c) - want[r][c]) < 1e-9);
    const Point3 p{0.3 * trial, -0.7, 1.1};
    const Point3 seq = transform_point(transform_point(p, a), b);
    const Point3 direct = transform_point(p, ab);
    CHECK(distance(seq, direct) < 1e-9);
    // Isometry.
    const Point3 q{-1.0, 0.25 * trial, 0.5};
    CHECK(std::abs(distance(transform_point(p, a), transform_point(q, a)) - distance(p, q)) < 1e-9);
  }
}

TEST_CASE("compose rejects mismatched frames") {
  const auto a = RigidTransform::identity(FrameId::Laser, FrameId::RobotBase);
  const auto b = RigidTransform::identity(FrameId::Camera, FrameId::RobotBase);
  CHECK_THROWS_AS(compose(a, b), FrameMismatch);
}

TEST_CASE("invert") {
  const auto id = RigidTransform::identity(FrameId::Laser, FrameId::RobotBase);
  CHECK(max_abs_diff(invert(id), RigidTransform::identity(FrameId::RobotBase, FrameId::Laser)) == 0.0);
  const auto t = RigidTransform::translation(0.3, -0.2, 0.1, FrameId::Laser, FrameId::RobotBase);
  const auto ti = invert(t);
  CHECK(ti.source() == FrameId::RobotBase);
  CHECK(ti.target() == FrameId::Laser);
  CHECK(distance(ti.translation_part(), Point3{-0.3, 0.2, -0.1}) < 1e-15);
  const auto r = RigidTransform::planar(M_PI / 6, 0.4, -1.0, FrameId::Camera, FrameId::RobotBase);
  CHECK(max_abs_diff(compose(r, invert(r)), RigidTransform::identity(FrameId::Camera, FrameId::Camera)) < 1e-9);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 10; ++i) {
    const auto m = random_rigid(rng, FrameId::Laser, FrameId::Camera);
    CHECK(max_abs_diff(compose(m, invert(m)), RigidTransform::identity(FrameId::Laser, FrameId::Laser)) < 1e-9);
  }
}

TEST_CASE("transform validation") {
  RigidTransform::Matrix m = RigidTransform::Matrix::Identity();
  m(0, 0) = 1.1;
  CHECK_THROWS_AS(RigidTransform(m, FrameId::Laser, FrameId::RobotBase), InvalidArgument);
  m = RigidTransform::Matrix::Identity();
  m(0, 0) = -1.0;  // reflection
  CHECK_THROWS_AS(RigidTransform(m, FrameId::Laser, FrameId::RobotBase), InvalidArgument);
  m = RigidTransform::Matrix::Identity();
  m(0, 3) = 0.5;  // last column must be [0 0 0 1]
  CHECK_THROWS_AS(RigidTransform(m, FrameId::Laser, FrameId::RobotBase), InvalidArgument);
}

TEST_CASE("pinhole deprojection") {
  CameraIntrinsics k{500, 500, 320, 320, 640, 640};
  CHECK(deproject_pixel(320, 320, 2.0, k) == Point3{0, 0, 2.0});
  CameraIntrinsics wide{500, 500, 320, 320, 1280, 640};
  const Point3 p = deproject_pixel(820, 320, 1.0, wide);
  CHECK(std::abs(p.x - 1.0) < 1e-15);
  CHECK(p.y == 0.0);
  CHECK(p.z == 1.0);
  CHECK_THROWS_AS(deproject_pixel(10, 10, 0.0, k), InvalidDepth);
  CHECK_THROWS_AS(deproject_pixel(10, 10, -1.0, k), InvalidDepth);
  CHECK_THROWS_AS(deproject_pixel(700, 10, 1.0, k), InvalidArgument);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 639.0), d(0.1, 10.0);
  CameraIntrinsics k2{612.5, 608.25, 318.7, 241.3, 640, 480};
  for (int i = 0; i < 1000; ++i) {
    const double uu = u(rng), vv = u(rng) * 479.0 / 639.0, dd = d(rng);
    const PixelUV back = project(deproject_pixel(uu, vv, dd, k2), k2);
    CHECK(std::abs(back.u - uu) < 1e-6);
    CHECK(std::abs(back.v - vv) < 1e-6);
  }
}

TEST_CASE("intrinsics validation") {
  CHECK_THROWS_AS((CameraIntrinsics{0, 500, 10, 10, 20, 20}.validate()), InvalidArgument);
  CHECK_THROWS_AS((CameraIntrinsics{500, 500, 20, 10, 20, 20}.validate()), InvalidArgument);
}

TEST_CASE("transform config round trip") {
  const auto m = RigidTransform::planar(0.3, 1.0, -2.0, FrameId::Laser, FrameId::RobotBase);
  const auto back = transform_from_json_text(transform_to_json_text(m));
  CHECK(back.source() == FrameId::Laser);
  CHECK(back.target() == FrameId::RobotBase);
  CHECK(max_abs_diff(m, back) == 0.0);

  const auto dir = std::filesystem::temp_directory_path() / "mina_geometry_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "frames.json").string();
  std::ofstream(path) << "{\"transforms\": [" << transform_to_json_text(m) << "]}";
  const auto all = read_transforms(path);
  REQUIRE(all.size() == 1);
  const auto inv = find_transform(all, FrameId::RobotBase, FrameId::Laser);
  CHECK(max_abs_diff(inv, invert(m)) < 1e-12);
  CHECK_THROWS_AS(find_transform(all, FrameId::Camera, FrameId::RobotBase), InvalidArgument);
  CHECK_THROWS(transform_from_json_text("{\"source\": \"L\"}"));
}
