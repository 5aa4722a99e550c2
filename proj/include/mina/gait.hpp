#pragma once

#include <array>
#include <string>
#include <vector>

#include "mina/blob.hpp"

namespace mina {

struct TrackSample {
  double timestamp = 0.0;
  Point3 point;
  /// False for the first sample of a segment.
  bool continued = false;
  int segment = 0;
};

struct LegTrack {
  std::vector<TrackSample> samples;
  FrameId frame = FrameId::RobotBase;
};

struct TrackerConfig {
  double max_gap = 0.5;  // s
  double v_max = 3.0;    // m/s
};

/// Two-leg tracker. Each valid observation is associated to the track heads
/// by the cheaper of the keep/swap hypotheses (total displacement).
class LegTracker {
 public:
  explicit LegTracker(TrackerConfig cfg = {});

  void push(const LegObservation& obs);
  const std::array<LegTrack, 2>& tracks() const { return tracks_; }

 private:
  TrackerConfig cfg_;
  std::array<LegTrack, 2> tracks_;
  std::array<int, 2> segment_{-1, -1};
  bool frame_set_ = false;
};

std::array<LegTrack, 2> track_legs(const std::vector<LegObservation>& stream, const TrackerConfig& cfg = {});

struct GaitConfig {
  double stance_speed = 0.1;        // enter stance below this foot speed, m/s
  double stance_exit_speed = 0.2;   // leave stance above this, m/s
  double min_stance_spacing = 0.2;  // s
  double smoothing_half_window = 0.15;  // s, local linear fit for foot velocity
};

struct FootGait {
  std::vector<double> stance_times;
  std::vector<Point3> stance_positions;
  std::vector<double> stride_lengths;
  std::vector<double> stride_durations;
};

struct GaitReport {
  double stride_length = 0.0;
  double stride_duration = 0.0;
  double stride_velocity = 0.0;
  double direction = 0.0;  // rad, in the track frame
  double cadence = 0.0;    // strides per second
  std::size_t strides = 0;
  std::array<FootGait, 2> feet;

  /// stride_velocity along the walking direction.
  Point3 walking_velocity() const;
};

/// Speed of one foot at each sample of one track segment.
std::vector<double> foot_speeds(const std::vector<TrackSample>& segment, double half_window);

/// Throws InsufficientData when fewer than two strides are found.
GaitReport estimate_gait(const std::array<LegTrack, 2>& tracks, const GaitConfig& cfg = {});

std::string gait_report_to_json(const GaitReport& r);

}  // namespace mina
