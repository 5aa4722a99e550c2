#include "mina/sim.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mina/error.hpp"

namespace mina {

namespace {

constexpr double kPi = std::numbers::pi;

using Rng = std::mt19937_64;

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double wrap_angle(double a) { return std::remainder(a, 2.0 * kPi); }

// Angular footprint of a disk of radius `rho` centered at (x, y) as seen from the origin.
struct Sector {
  double center;
  double half_width;
  double near;
  double far;
};

Sector sector_of(double x, double y, double rho) {
  const double d = std::hypot(x, y);
  return {std::atan2(y, x), std::asin(std::min(1.0, rho / std::max(d, 1e-9))), d - rho, d + rho};
}

bool sectors_overlap(const Sector& a, const Sector& b, double margin) {
  return std::abs(wrap_angle(a.center - b.center)) < a.half_width + b.half_width + margin;
}

struct BoxPlacement {
  double min_size = 0.03;
  double max_size = 0.08;
  double extent = 1.15;      // |x|, |y| limit for box centers
  double min_range = 0.30;   // from the laser
  double max_bearing = 130.0 * kPi / 180.0;
  double min_leg_gap = 0.10; // box bounding circle to leg surface
  bool allow_occlusion = false;
};

bool box_conflicts(const ClutterBox& b, const std::array<LegDisk, 2>& legs,
                   const std::vector<ClutterBox>& placed, const BoxPlacement& p) {
  const double rho = b.bounding_radius();
  const Sector bs = sector_of(b.cx, b.cy, rho);
  for (const auto& leg : legs) {
    if (std::hypot(b.cx - leg.center.x, b.cy - leg.center.y) < rho + leg.radius + p.min_leg_gap)
      return true;
    if (!p.allow_occlusion) {
      const Sector ls = sector_of(leg.center.x, leg.center.y, leg.radius);
      if (sectors_overlap(bs, ls, 0.03) && bs.near < ls.far) return true;
    }
  }
  for (const auto& o : placed)
    if (std::hypot(b.cx - o.cx, b.cy - o.cy) < rho + o.bounding_radius() + 0.05) return true;
  return false;
}

std::vector<ClutterBox> place_boxes(Rng& rng, int count, const std::array<LegDisk, 2>& legs,
                                    std::vector<ClutterBox> placed, const BoxPlacement& p) {
  for (int k = 0; k < count; ++k) {
    for (int attempt = 0; attempt < 500; ++attempt) {
      ClutterBox b;
      b.hx = uniform(rng, p.min_size, p.max_size);
      b.hy = uniform(rng, p.min_size, p.max_size);
      b.yaw = uniform(rng, 0.0, kPi);
      b.cx = uniform(rng, -p.extent, p.extent);
      b.cy = uniform(rng, -p.extent, p.extent);
      const double d = std::hypot(b.cx, b.cy);
      if (d < p.min_range + b.bounding_radius()) continue;
      if (std::abs(std::atan2(b.cy, b.cx)) > p.max_bearing) continue;
      if (box_conflicts(b, legs, placed, p)) continue;
      placed.push_back(b);
      break;
    }
  }
  return placed;
}

// A box standing beside one leg, on the side away from the other leg, its
// front face level with the front of the leg and a gap of at most 1 cm. In the
// raw grid its face pixels usually touch the leg arc.
std::optional<ClutterBox> box_beside_leg(Rng& rng, const std::array<LegDisk, 2>& legs) {
  const int which = uniform_int(rng, 0, 1);
  const LegDisk& leg = legs[static_cast<std::size_t>(which)];
  const LegDisk& other = legs[static_cast<std::size_t>(1 - which)];
  const double d = std::hypot(leg.center.x, leg.center.y);
  const double ux = leg.center.x / d, uy = leg.center.y / d;
  double tx = -uy, ty = ux;
  if (tx * (other.center.x - leg.center.x) + ty * (other.center.y - leg.center.y) > 0.0) {
    tx = -tx;
    ty = -ty;
  }
  ClutterBox b;
  b.hx = uniform(rng, 0.04, 0.08);
  b.hy = uniform(rng, 0.03, 0.06);
  b.yaw = std::atan2(ty, tx);
  const double gap = uniform(rng, 0.0, 0.01);
  const double lateral = leg.radius + gap + b.hx;
  const double depth = b.hy - 0.02;
  b.cx = leg.center.x + tx * lateral + ux * depth;
  b.cy = leg.center.y + ty * lateral + uy * depth;
  // Must not hide either leg: the box's angular extent may not overlap a leg's.
  double lo = 1e9, hi = -1e9;
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  for (int sx : {-1, 1})
    for (int sy : {-1, 1}) {
      const double px = b.cx + sx * b.hx * c - sy * b.hy * s;
      const double py = b.cy + sx * b.hx * s + sy * b.hy * c;
      const double a = std::atan2(py, px);
      lo = std::min(lo, a);
      hi = std::max(hi, a);
    }
  for (const auto& l : legs) {
    const double a = std::atan2(l.center.y, l.center.x);
    const double hw = std::asin(std::min(1.0, l.radius / std::hypot(l.center.x, l.center.y)));
    if (hi > a - hw && lo < a + hw) return std::nullopt;
  }
  return b;
}

}  // namespace

void LaserSpec::validate() const {
  if (beam_count < 2) throw InvalidArgument("laser beam_count must be >= 2");
  if (!(angle_increment > 0.0)) throw InvalidArgument("laser angle_increment must be > 0");
  if (!(range_max > 0.0)) throw InvalidArgument("laser range_max must be > 0");
  if (!(range_noise_sigma >= 0.0)) throw InvalidArgument("laser noise sigma must be >= 0");
}

void LegDisk::validate() const {
  if (!(radius >= 0.03 && radius <= 0.12)) throw InvalidArgument("leg radius must lie in [0.03, 0.12]");
  if (center.z != 0.0 || !center.finite()) throw InvalidArgument("leg center must be planar and finite");
}

void ClutterBox::validate() const {
  if (!(hx >= 0.02 && hx <= 0.20 && hy >= 0.02 && hy <= 0.20))
    throw InvalidArgument("clutter half-extents must lie in [0.02, 0.20]");
}

double ClutterBox::bounding_radius() const { return std::hypot(hx, hy); }

WalkerModel WalkerModel::standing(double x, double y, double heading, double half_separation) {
  WalkerModel w;
  w.x = x;
  w.y = y;
  w.heading = heading;
  w.half_separation = half_separation;
  return w;
}

WalkerModel WalkerModel::walking(double x, double y, double heading, double speed,
                                 double stride_length, double half_separation, double phase) {
  WalkerModel w = standing(x, y, heading, half_separation);
  w.speed = speed;
  w.stride_length = stride_length;
  w.cadence = speed > 0.0 ? speed / stride_length : 0.0;
  w.phase = phase;
  w.validate();
  return w;
}

void WalkerModel::validate() const {
  if (!(speed >= 0.0)) throw InvalidArgument("walker speed must be >= 0");
  if (speed > 0.0) {
    if (!(stride_length > 0.0)) throw InvalidArgument("walker stride_length must be > 0");
    if (std::abs(cadence - speed / stride_length) > 1e-12)
      throw InvalidArgument("walker cadence must equal speed / stride_length");
  }
}

double WalkerModel::swing_amplitude() const {
  return speed > 0.0 ? stride_length / (2.0 * kPi) : 0.0;
}

std::array<LegDisk, 2> WalkerModel::legs() const {
  const double hx = std::cos(heading), hy = std::sin(heading);
  const double nx = -hy, ny = hx;
  const double swing = swing_amplitude() * std::sin(phase);
  LegDisk left{{x + half_separation * nx - swing * hx, y + half_separation * ny - swing * hy, 0.0},
               leg_radius};
  LegDisk right{{x - half_separation * nx + swing * hx, y - half_separation * ny + swing * hy, 0.0},
                leg_radius};
  return {left, right};
}

std::pair<WalkerModel, std::array<LegDisk, 2>> step_walker(const WalkerModel& model, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("step_walker: dt must be > 0");
  WalkerModel next = model;
  next.x += model.speed * dt * std::cos(model.heading);
  next.y += model.speed * dt * std::sin(model.heading);
  next.phase = std::fmod(model.phase + 2.0 * kPi * model.cadence * dt, 2.0 * kPi);
  return {next, next.legs()};
}

RigidTransform default_laser_mount() {
  return RigidTransform::planar(kPi, -0.2, 0.0, FrameId::Laser, FrameId::RobotBase);
}

void Scene::validate(double range_max) const {
  for (const auto& l : legs) l.validate();
  if (distance(legs[0].center, legs[1].center) <= legs[0].radius + legs[1].radius)
    throw InvalidArgument("scene legs overlap");
  for (const auto& l : legs)
    if (l.center.norm() + l.radius >= range_max) throw InvalidArgument("leg beyond range_max");
  for (const auto& b : clutter) {
    b.validate();
    if (std::hypot(b.cx, b.cy) + b.bounding_radius() >= range_max)
      throw InvalidArgument("clutter box beyond range_max");
  }
  if (laser_to_robot.source() != FrameId::Laser || laser_to_robot.target() != FrameId::RobotBase)
    throw FrameMismatch("scene laser pose must map L to R");
}

double ray_circle(double angle, const LegDisk& disk) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double b = dx * disk.center.x + dy * disk.center.y;
  const double c = disk.center.x * disk.center.x + disk.center.y * disk.center.y -
                   disk.radius * disk.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return -1.0;
  const double t = b - std::sqrt(disc);
  return t > 0.0 ? t : -1.0;
}

double ray_box(double angle, const ClutterBox& box) {
  // Ray expressed in the box frame.
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double ox = -box.cx, oy = -box.cy;
  const double o[2] = {c * ox + s * oy, -s * ox + c * oy};
  const double dx = std::cos(angle), dy = std::sin(angle);
  const double d[2] = {c * dx + s * dy, -s * dx + c * dy};
  const double h[2] = {box.hx, box.hy};
  double t_near = -std::numeric_limits<double>::infinity();
  double t_far = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (std::abs(o[k]) > h[k]) return -1.0;
      continue;
    }
    double t1 = (-h[k] - o[k]) / d[k];
    double t2 = (h[k] - o[k]) / d[k];
    if (t1 > t2) std::swap(t1, t2);
    t_near = std::max(t_near, t1);
    t_far = std::min(t_far, t2);
  }
  if (t_near > t_far || t_near <= 0.0) return -1.0;
  return t_near;
}

LabeledScan cast_scan_labeled(const Scene& scene, const LaserSpec& spec, std::uint64_t rng_seed,
                              double timestamp) {
  spec.validate();
  LabeledScan out;
  out.scan.timestamp = timestamp;
  out.scan.angle_min = spec.angle_min;
  out.scan.angle_increment = spec.angle_increment;
  out.scan.range_max = spec.range_max;
  out.scan.ranges.resize(static_cast<std::size_t>(spec.beam_count));
  out.hits.resize(static_cast<std::size_t>(spec.beam_count));
  Rng rng = make_rng(rng_seed, 0x5ca9);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < out.scan.ranges.size(); ++i) {
    const double a = out.scan.angle(i);
    double best = spec.range_max;
    HitKind kind = HitKind::None;
    for (std::size_t k = 0; k < 2; ++k) {
      const double t = ray_circle(a, scene.legs[k]);
      if (t > 0.0 && t < best) {
        best = t;
        kind = k == 0 ? HitKind::Leg0 : HitKind::Leg1;
      }
    }
    for (const auto& b : scene.clutter) {
      const double t = ray_box(a, b);
      if (t > 0.0 && t < best) {
        best = t;
        kind = HitKind::Clutter;
      }
    }
    // One draw per beam keeps the noise sequence independent of scene content.
    const double n = noise(rng);
    if (kind != HitKind::None && spec.range_noise_sigma > 0.0)
      best = std::clamp(best + spec.range_noise_sigma * n, 0.0, spec.range_max);
    out.scan.ranges[i] = best;
    out.hits[i] = kind;
  }
  return out;
}

LaserScan cast_scan(const Scene& scene, const LaserSpec& spec, std::uint64_t rng_seed) {
  return cast_scan_labeled(scene, spec, rng_seed).scan;
}

std::pair<OccupancyGrid, OccupancyGrid> rasterize_labeled(const LabeledScan& labeled,
                                                          const GridSpec& grid,
                                                          const Augmentation& aug) {
  const LaserScan& scan = labeled.scan;
  OccupancyGrid occ(grid);
  OccupancyGrid legs(grid);
  for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
    const double d = scan.ranges[i];
    if (d >= scan.range_max) continue;
    const double a = scan.angle(i) + aug.rotation;
    const double x = d * std::cos(a);
    const double y = (aug.flip ? -1.0 : 1.0) * d * std::sin(a);
    auto p = pixel_of(x, y, grid);
    if (!p) continue;
    const int px = p->px + aug.shift_x;
    const int py = p->py + aug.shift_y;
    if (!occ.in_bounds(px, py)) continue;
    occ.set(px, py, true);
    if (labeled.hits[i] == HitKind::Leg0 || labeled.hits[i] == HitKind::Leg1)
      legs.set(px, py, true);
  }
  OccupancyGrid mask(grid);
  const int n = grid.matrix_length;
  for (int px = 0; px < n; ++px)
    for (int py = 0; py < n; ++py) {
      if (!legs.occupied(px, py)) continue;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          if (mask.in_bounds(px + dx, py + dy)) mask.set(px + dx, py + dy, true);
    }
  return {std::move(occ), std::move(mask)};
}

std::array<Point3, 2> leg_surface_centers(const LabeledScan& labeled, const std::array<LegDisk, 2>& legs,
                                          const GridSpec& grid) {
  std::array<Point3, 2> out{legs[0].center, legs[1].center};
  const LaserScan& scan = labeled.scan;
  for (int k = 0; k < 2; ++k) {
    const HitKind kind = k == 0 ? HitKind::Leg0 : HitKind::Leg1;
    OccupancyGrid mask(grid);
    bool any = false;
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
      if (labeled.hits[i] != kind || scan.ranges[i] >= scan.range_max) continue;
      const double a = scan.angle(i);
      auto p = pixel_of(scan.ranges[i] * std::cos(a), scan.ranges[i] * std::sin(a), grid);
      if (!p) continue;
      any = true;
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          if (mask.in_bounds(p->px + dx, p->py + dy)) mask.set(p->px + dx, p->py + dy, true);
    }
    if (!any) continue;
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (int px = 0; px < grid.matrix_length; ++px)
      for (int py = 0; py < grid.matrix_length; ++py)
        if (mask.occupied(px, py)) {
          sx += px;
          sy += py;
          ++n;
        }
    out[k] = deproject_cell(sx / static_cast<double>(n), sy / static_cast<double>(n), grid);
  }
  return out;
}

std::vector<Trial> gen_protocol_trials(std::uint64_t seed, const ProtocolConfig& cfg) {
  std::vector<Trial> trials;
  for (int scenario = 1; scenario <= 2; ++scenario) {
    for (int loc = 0; loc < 9; ++loc) {
      const auto index = static_cast<std::uint64_t>(trials.size());
      Rng rng = make_rng(seed, 1000 + index);
      Trial t;
      t.scenario = scenario;
      t.location = loc + 1;
      const double dist = cfg.distances[static_cast<std::size_t>(loc / 3)];
      const double lateral = cfg.lateral_offsets[static_cast<std::size_t>(loc % 3)];
      const double half_sep = uniform(rng, 0.09, 0.12);
      const double stagger = uniform(rng, -0.04, 0.04);
      t.scene.legs[0] = LegDisk{{dist + stagger, lateral + half_sep, 0.0}, 0.06};
      t.scene.legs[1] = LegDisk{{dist - stagger, lateral - half_sep, 0.0}, 0.06};
      t.scene.seed = seed * 1000003ULL + index;
      const int boxes = scenario == 1
                            ? uniform_int(rng, cfg.scenario1_min_boxes, cfg.scenario1_max_boxes)
                            : uniform_int(rng, cfg.scenario2_min_boxes, cfg.scenario2_max_boxes);
      std::vector<ClutterBox> placed;
      if (scenario == 2) {
        for (int k = 0; k < cfg.scenario2_near_leg_boxes && static_cast<int>(placed.size()) < boxes; ++k)
          for (int attempt = 0; attempt < 100; ++attempt)
            if (auto b = box_beside_leg(rng, t.scene.legs)) {
              placed.push_back(*b);
              break;
            }
      }
      BoxPlacement placement;
      const int remaining = boxes - static_cast<int>(placed.size());
      t.scene.clutter = place_boxes(rng, remaining, t.scene.legs, std::move(placed), placement);
      t.scene.validate(cfg.laser.range_max);

      const LabeledScan labeled = cast_scan_labeled(t.scene, cfg.laser, t.scene.seed);
      auto [grid, mask] = rasterize_labeled(labeled, cfg.grid);
      t.truth.leg_centers = {t.scene.legs[0].center, t.scene.legs[1].center};
      t.truth.surface_centers = leg_surface_centers(labeled, t.scene.legs, cfg.grid);
      t.truth.mask = std::move(mask);
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

LaserScan trial_scan(const Trial& trial, const LaserSpec& spec) {
  return cast_scan(trial.scene, spec, trial.scene.seed);
}

std::vector<TrainingPair> gen_training_set(int n, std::uint64_t seed, const TrainingSetConfig& cfg) {
  if (n <= 0) throw InvalidArgument("gen_training_set: n must be > 0");
  std::vector<TrainingPair> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, 500000 + static_cast<std::uint64_t>(i));
    Scene scene;
    scene.seed = seed * 7919ULL + static_cast<std::uint64_t>(i);
    for (;;) {
      const double dist = uniform(rng, 0.35, 1.15);
      const double bearing = uniform(rng, -1.1, 1.1);
      const double speed = uniform(rng, 0.0, 1.0) < 0.3 ? 0.0 : uniform(rng, 0.2, 0.9);
      const double stride = uniform(rng, 0.4, 1.3);
      WalkerModel w = speed > 0.0
                          ? WalkerModel::walking(dist * std::cos(bearing), dist * std::sin(bearing),
                                                 uniform(rng, -kPi, kPi), speed, stride,
                                                 uniform(rng, 0.08, 0.14), uniform(rng, 0.0, 2 * kPi))
                          : WalkerModel::standing(dist * std::cos(bearing), dist * std::sin(bearing),
                                                  uniform(rng, -kPi, kPi), uniform(rng, 0.08, 0.14));
      w.leg_radius = uniform(rng, 0.05, 0.07);
      scene.legs = w.legs();
      bool ok = true;
      for (const auto& l : scene.legs)
        ok = ok && std::abs(l.center.x) < 1.18 && std::abs(l.center.y) < 1.18 &&
             l.center.norm() > l.radius + 0.15;
      if (ok) break;
    }
    const int boxes = uniform_int(rng, 0, cfg.max_boxes);
    BoxPlacement placement;
    placement.min_leg_gap = 0.01;
    placement.allow_occlusion = true;
    std::vector<ClutterBox> placed;
    if (boxes > 0 && uniform(rng, 0.0, 1.0) < 0.4)
      if (auto b = box_beside_leg(rng, scene.legs)) placed.push_back(*b);
    for (int k = static_cast<int>(placed.size()); k < boxes; ++k) {
      const bool large = uniform(rng, 0.0, 1.0) < 0.25;
      placement.min_size = 0.02;
      placement.max_size = large ? 0.20 : 0.08;
      placed = place_boxes(rng, 1, scene.legs, std::move(placed), placement);
    }
    scene.clutter = std::move(placed);
    scene.validate(cfg.laser.range_max);

    Augmentation aug;
    if (cfg.random_rotation) aug.rotation = uniform(rng, -kPi, kPi);
    if (cfg.random_flip) aug.flip = uniform(rng, 0.0, 1.0) < 0.5;
    if (cfg.max_shift > 0) {
      aug.shift_x = uniform_int(rng, -cfg.max_shift, cfg.max_shift);
      aug.shift_y = uniform_int(rng, -cfg.max_shift, cfg.max_shift);
    }
    const LabeledScan labeled = cast_scan_labeled(scene, cfg.laser, scene.seed);
    auto [grid, mask] = rasterize_labeled(labeled, cfg.grid, aug);
    out.push_back({std::move(grid), std::move(mask)});
  }
  return out;
}

}  // namespace mina
