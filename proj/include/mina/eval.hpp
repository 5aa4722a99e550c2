#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mina/blob.hpp"
#include "mina/sim.hpp"
#include "mina/unet.hpp"

namespace mina {

struct EvalThresholds {
  double detect_distance = 0.05;  // m, blob centroid to leg center
  double fp_distance = 0.10;      // m, clutter blob to both leg centers
  LegFilter filter;
};

struct TrialResult {
  int scenario = 1;
  int location = 1;
  bool legs_detected = false;
  bool false_positive = false;
  std::vector<Point3> centroids;  // leg-sized blobs, laser frame
};

struct EvalSummary {
  int n_t = 0;
  int n_s = 0;
  int n_f = 0;
  double acc = 0.0;  // percent
  double fp = 0.0;   // percent
};

/// Detection and false-positive flags are independent.
TrialResult classify_trial(const SegmentationMask& mask, const GroundTruth& truth,
                           const EvalThresholds& thresholds = {}, const GridSpec& grid = {});

double accuracy(int n_s, int n_t);
double fp_rate(int n_f, int n_t);
/// n/n_t as a percentage truncated to one decimal, e.g. 7/18 -> "38.8".
std::string format_percent(int n, int n_t);

EvalSummary summarize(const std::vector<TrialResult>& trials);

/// Clutter-naive classical segmenter: every occupied blob in the leg area band.
SegmentationMask baseline_segment(const OccupancyGrid& grid, const LegFilter& filter = {});

struct ProtocolReport {
  std::string model;
  std::uint64_t seed = 0;
  EvalThresholds thresholds;
  std::vector<TrialResult> trials;
  EvalSummary summary;
  std::array<EvalSummary, 2> per_scenario;
};

ProtocolReport run_protocol(const Segmenter& segmenter, const std::vector<Trial>& trials,
                            const std::string& model_name, std::uint64_t seed,
                            const EvalThresholds& thresholds = {}, const ProtocolConfig& cfg = {});

std::string report_to_json(const ProtocolReport& r);
ProtocolReport report_from_json(const std::string& text);

struct CalibrationConfig {
  /// Protocol seeds first_seed .. first_seed + seeds - 1; keep them apart from
  /// the seeds used for evaluation.
  std::uint64_t first_seed = 1000000;
  int seeds = 10;
  double max_offset = 6.0;
  double offset_step = 0.25;

  void validate() const;
};

struct OperatingPoint {
  double logit_offset = 0.0;
  int n_t = 0;
  int n_s = 0;
  int n_f = 0;
};

/// Scans logit thresholds 0, step, .., max_offset on held-out protocol trials
/// and returns the one maximizing detections minus false positives (the
/// median one when several tie).
OperatingPoint calibrate_operating_point(const UNet<float>& model, const CalibrationConfig& cfg = {},
                                         const EvalThresholds& thresholds = {},
                                         const ProtocolConfig& protocol = {});

/// Lowers the output bias by `offset` so that p = 0.5 sits at that logit.
void apply_logit_offset(UNet<float>& model, double offset);

/// Side-by-side "Legs detected x/n | False Positives y/n" table, one column
/// pair per report, with a per-scenario breakdown below.
std::string format_table(const std::vector<ProtocolReport>& reports);

}  // namespace mina
