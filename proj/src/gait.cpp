#include "mina/gait.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "mina/error.hpp"

namespace mina {

namespace {

double planar_distance(const Point3& a, const Point3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

LegTracker::LegTracker(TrackerConfig cfg) : cfg_(cfg) {
  if (!(cfg_.max_gap > 0.0) || !(cfg_.v_max > 0.0)) throw InvalidArgument("tracker gap and v_max must be > 0");
}

void LegTracker::push(const LegObservation& obs) {
  if (!obs.valid) return;
  if (!frame_set_) {
    tracks_[0].frame = tracks_[1].frame = obs.frame;
    frame_set_ = true;
  } else if (obs.frame != tracks_[0].frame) {
    throw FrameMismatch("track_legs: observation frame changed mid-stream");
  }
  const std::array<Point3, 2> pts{obs.left, obs.right};
  const bool has0 = !tracks_[0].samples.empty();
  const bool has1 = !tracks_[1].samples.empty();

  std::array<int, 2> assign{0, 1};
  if (has0 || has1) {
    double keep = 0.0, swap = 0.0;
    if (has0) {
      keep += planar_distance(pts[0], tracks_[0].samples.back().point);
      swap += planar_distance(pts[1], tracks_[0].samples.back().point);
    }
    if (has1) {
      keep += planar_distance(pts[1], tracks_[1].samples.back().point);
      swap += planar_distance(pts[0], tracks_[1].samples.back().point);
    }
    if (swap < keep) assign = {1, 0};
  }

  for (int k = 0; k < 2; ++k) {
    LegTrack& track = tracks_[k];
    const Point3& p = pts[assign[k]];
    TrackSample s{obs.timestamp, p, false, segment_[k]};
    if (!track.samples.empty()) {
      const TrackSample& head = track.samples.back();
      const double dt = obs.timestamp - head.timestamp;
      if (!(dt > 0.0)) continue;
      if (dt <= cfg_.max_gap) {
        if (planar_distance(p, head.point) > cfg_.v_max * dt) continue;
        s.continued = true;
      }
    }
    if (!s.continued) s.segment = ++segment_[k];
    track.samples.push_back(s);
  }
}

std::array<LegTrack, 2> track_legs(const std::vector<LegObservation>& stream, const TrackerConfig& cfg) {
  LegTracker tracker(cfg);
  for (const auto& obs : stream) tracker.push(obs);
  return tracker.tracks();
}

std::vector<double> foot_speeds(const std::vector<TrackSample>& seg, double half_window) {
  const std::size_t n = seg.size();
  std::vector<double> speeds(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t lo = i, hi = i;
    while (lo > 0 && seg[i].timestamp - seg[lo - 1].timestamp <= half_window) --lo;
    while (hi + 1 < n && seg[hi + 1].timestamp - seg[i].timestamp <= half_window) ++hi;
    if (hi - lo < 2) {
      lo = i > 0 ? i - 1 : 0;
      hi = std::min(n - 1, lo + 2);
      lo = hi >= 2 ? hi - 2 : 0;
    }
    const double m = static_cast<double>(hi - lo + 1);
    double tm = 0.0, xm = 0.0, ym = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      tm += seg[j].timestamp;
      xm += seg[j].point.x;
      ym += seg[j].point.y;
    }
    tm /= m;
    xm /= m;
    ym /= m;
    double stt = 0.0, stx = 0.0, sty = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      const double dt = seg[j].timestamp - tm;
      stt += dt * dt;
      stx += dt * (seg[j].point.x - xm);
      sty += dt * (seg[j].point.y - ym);
    }
    speeds[i] = stt > 0.0 ? std::hypot(stx / stt, sty / stt) : 0.0;
  }
  return speeds;
}

Point3 GaitReport::walking_velocity() const {
  return {stride_velocity * std::cos(direction), stride_velocity * std::sin(direction), 0.0};
}

namespace {

struct StanceEvent {
  double t;
  double speed;
  Point3 p;
};

std::vector<StanceEvent> detect_stances(const std::vector<TrackSample>& seg, const GaitConfig& cfg) {
  std::vector<StanceEvent> events;
  if (seg.size() < 3) return events;
  const auto speeds = foot_speeds(seg, cfg.smoothing_half_window);
  bool in_run = false;
  std::size_t start = 0, best = 0;
  for (std::size_t i = 0; i < seg.size(); ++i) {
    const double s = speeds[i];
    if (!in_run) {
      if (s < cfg.stance_speed) {
        in_run = true;
        start = best = i;
      }
      continue;
    }
    if (s < speeds[best]) best = i;
    if (s > cfg.stance_exit_speed) {
      in_run = false;
      // A run touching the segment start may have begun earlier; skip it.
      if (start == 0) continue;
      Point3 sum;
      int count = 0;
      for (std::size_t j = start; j < i; ++j)
        if (speeds[j] < cfg.stance_speed) {
          sum = sum + seg[j].point;
          ++count;
        }
      events.push_back({seg[best].timestamp, speeds[best], (1.0 / count) * sum});
    }
  }
  std::vector<StanceEvent> spaced;
  for (const auto& e : events) {
    if (!spaced.empty() && e.t - spaced.back().t < cfg.min_stance_spacing) {
      if (e.speed < spaced.back().speed) spaced.back() = e;
      continue;
    }
    spaced.push_back(e);
  }
  return spaced;
}

double principal_direction(const std::array<LegTrack, 2>& tracks) {
  std::map<double, Point3> right;
  for (const auto& s : tracks[1].samples) right[s.timestamp] = s.point;
  std::vector<Point3> mids;
  for (const auto& s : tracks[0].samples) {
    auto it = right.find(s.timestamp);
    if (it != right.end()) mids.push_back(0.5 * (s.point + it->second));
  }
  if (mids.size() < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (const auto& p : mids) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(mids.size());
  my /= static_cast<double>(mids.size());
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : mids) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
    syy += (p.y - my) * (p.y - my);
  }
  double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const Point3 net = mids.back() - mids.front();
  if (net.x * std::cos(theta) + net.y * std::sin(theta) < 0.0) theta += M_PI;
  return std::atan2(std::sin(theta), std::cos(theta));
}

}  // namespace

GaitReport estimate_gait(const std::array<LegTrack, 2>& tracks, const GaitConfig& cfg) {
  GaitReport r;
  double length_sum = 0.0, duration_sum = 0.0;
  for (int k = 0; k < 2; ++k) {
    const auto& samples = tracks[k].samples;
    FootGait& foot = r.feet[k];
    std::size_t begin = 0;
    while (begin < samples.size()) {
      std::size_t end = begin + 1;
      while (end < samples.size() && samples[end].segment == samples[begin].segment) ++end;
      const std::vector<TrackSample> seg(samples.begin() + static_cast<std::ptrdiff_t>(begin),
                                         samples.begin() + static_cast<std::ptrdiff_t>(end));
      const auto events = detect_stances(seg, cfg);
      for (std::size_t e = 0; e < events.size(); ++e) {
        foot.stance_times.push_back(events[e].t);
        foot.stance_positions.push_back(events[e].p);
        if (e == 0) continue;
        const double len = planar_distance(events[e].p, events[e - 1].p);
        const double dur = events[e].t - events[e - 1].t;
        foot.stride_lengths.push_back(len);
        foot.stride_durations.push_back(dur);
        length_sum += len;
        duration_sum += dur;
        ++r.strides;
      }
      begin = end;
    }
  }
  if (r.strides < 2)
    throw InsufficientData("estimate_gait: found " + std::to_string(r.strides) + " strides, need at least 2");
  r.stride_length = length_sum / static_cast<double>(r.strides);
  r.stride_duration = duration_sum / static_cast<double>(r.strides);
  r.stride_velocity = r.stride_length / r.stride_duration;
  r.cadence = 1.0 / r.stride_duration;
  r.direction = principal_direction(tracks);
  return r;
}

std::string gait_report_to_json(const GaitReport& r) {
  nlohmann::ordered_json j;
  j["stride_length"] = r.stride_length;
  j["stride_duration"] = r.stride_duration;
  j["stride_velocity"] = r.stride_velocity;
  j["direction"] = r.direction;
  j["cadence"] = r.cadence;
  j["strides"] = r.strides;
  for (int k = 0; k < 2; ++k) {
    nlohmann::ordered_json f;
    f["stance_times"] = r.feet[k].stance_times;
    f["stride_lengths"] = r.feet[k].stride_lengths;
    f["stride_durations"] = r.feet[k].stride_durations;
    j[k == 0 ? "left" : "right"] = f;
  }
  return j.dump(2) + "\n";
}

}  // namespace mina
