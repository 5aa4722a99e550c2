#include "mina/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "mina/error.hpp"

namespace mina {

namespace {

double planar_distance(const Point3& a, const Point3& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TrialResult classify_trial(const SegmentationMask& mask, const GroundTruth& truth,
                           const EvalThresholds& th, const GridSpec& grid) {
  TrialResult r;
  for (const auto& b : connected_components(mask))
    if (th.filter.leg_sized(b)) r.centroids.push_back(deproject_cell(b.cx, b.cy, grid));
  const auto& legs = truth.surface_centers;
  const std::size_t n = r.centroids.size();
  for (std::size_t i = 0; i < n && !r.legs_detected; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (planar_distance(r.centroids[i], legs[0]) <= th.detect_distance &&
          planar_distance(r.centroids[j], legs[1]) <= th.detect_distance) {
        r.legs_detected = true;
        break;
      }
    }
  for (const auto& c : r.centroids)
    if (planar_distance(c, legs[0]) >= th.fp_distance && planar_distance(c, legs[1]) >= th.fp_distance)
      r.false_positive = true;
  return r;
}

double accuracy(int n_s, int n_t) {
  if (n_t <= 0) throw InvalidArgument("accuracy: n_t must be > 0");
  if (n_s < 0 || n_s > n_t) throw InvalidArgument("accuracy: n_s must be in [0, n_t]");
  return static_cast<double>(n_s) / static_cast<double>(n_t) * 100.0;
}

double fp_rate(int n_f, int n_t) {
  if (n_t <= 0) throw InvalidArgument("fp_rate: n_t must be > 0");
  if (n_f < 0 || n_f > n_t) throw InvalidArgument("fp_rate: n_f must be in [0, n_t]");
  return static_cast<double>(n_f) / static_cast<double>(n_t) * 100.0;
}

std::string format_percent(int n, int n_t) {
  if (n_t <= 0) throw InvalidArgument("format_percent: n_t must be > 0");
  if (n < 0 || n > n_t) throw InvalidArgument("format_percent: n must be in [0, n_t]");
  const long long tenths = static_cast<long long>(n) * 1000 / n_t;
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

EvalSummary summarize(const std::vector<TrialResult>& trials) {
  EvalSummary s;
  for (const auto& t : trials) {
    ++s.n_t;
    s.n_s += t.legs_detected ? 1 : 0;
    s.n_f += t.false_positive ? 1 : 0;
  }
  if (s.n_t > 0) {
    s.acc = accuracy(s.n_s, s.n_t);
    s.fp = fp_rate(s.n_f, s.n_t);
  }
  return s;
}

SegmentationMask baseline_segment(const OccupancyGrid& grid, const LegFilter& filter) {
  const SegmentationMask occupied = mask_from_grid(grid);
  SegmentationMask out = occupied;
  std::fill(out.prob.begin(), out.prob.end(), 0.0f);
  for (const auto& b : connected_components(occupied))
    if (filter.leg_sized(b))
      for (const auto& p : b.pixels) out.prob[static_cast<std::size_t>(p.px) * out.size + p.py] = 1.0f;
  return out;
}

ProtocolReport run_protocol(const Segmenter& segmenter, const std::vector<Trial>& trials,
                            const std::string& model_name, std::uint64_t seed,
                            const EvalThresholds& thresholds, const ProtocolConfig& cfg) {
  if (trials.empty()) throw InvalidArgument("run_protocol: no trials");
  ProtocolReport r;
  r.model = model_name;
  r.seed = seed;
  r.thresholds = thresholds;
  for (const auto& trial : trials) {
    const OccupancyGrid grid = rasterize(trial_scan(trial, cfg.laser), cfg.grid);
    TrialResult t = classify_trial(segmenter(grid), trial.truth, thresholds, cfg.grid);
    t.scenario = trial.scenario;
    t.location = trial.location;
    r.trials.push_back(std::move(t));
  }
  r.summary = summarize(r.trials);
  for (int s = 1; s <= 2; ++s) {
    std::vector<TrialResult> subset;
    std::copy_if(r.trials.begin(), r.trials.end(), std::back_inserter(subset),
                 [s](const TrialResult& t) { return t.scenario == s; });
    r.per_scenario[s - 1] = summarize(subset);
  }
  return r;
}

void CalibrationConfig::validate() const {
  if (seeds <= 0) throw InvalidArgument("calibration seeds must be > 0");
  if (!(offset_step > 0.0)) throw InvalidArgument("calibration offset_step must be > 0");
  if (!(max_offset >= 0.0)) throw InvalidArgument("calibration max_offset must be >= 0");
}

OperatingPoint calibrate_operating_point(const UNet<float>& model, const CalibrationConfig& cfg,
                                         const EvalThresholds& thresholds, const ProtocolConfig& protocol) {
  cfg.validate();
  const auto n_offsets = static_cast<std::size_t>(std::floor(cfg.max_offset / cfg.offset_step + 1e-9)) + 1;
  std::vector<OperatingPoint> points(n_offsets);
  for (std::size_t k = 0; k < n_offsets; ++k) points[k].logit_offset = static_cast<double>(k) * cfg.offset_step;

  for (int s = 0; s < cfg.seeds; ++s) {
    for (const auto& trial : gen_protocol_trials(cfg.first_seed + static_cast<std::uint64_t>(s), protocol)) {
      const OccupancyGrid grid = rasterize(trial_scan(trial, protocol.laser), protocol.grid);
      if (grid.size() != model.config().input_size)
        throw ShapeError("calibrate_operating_point: grid is " + std::to_string(grid.size()) +
                         " but the model expects " + std::to_string(model.config().input_size));
      const Tensor<float> logits = model.forward(grid_to_tensor<float>(grid));
      SegmentationMask mask;
      mask.size = grid.size();
      mask.prob.resize(logits.values().size());
      for (auto& p : points) {
        for (std::size_t i = 0; i < mask.prob.size(); ++i)
          mask.prob[i] = logits.values()[i] >= p.logit_offset ? 1.0f : 0.0f;
        const TrialResult t = classify_trial(mask, trial.truth, thresholds, protocol.grid);
        ++p.n_t;
        p.n_s += t.legs_detected;
        p.n_f += t.false_positive;
      }
    }
  }
  int best = points.front().n_s - points.front().n_f;
  for (const auto& p : points) best = std::max(best, p.n_s - p.n_f);
  std::vector<std::size_t> ties;
  for (std::size_t k = 0; k < points.size(); ++k)
    if (points[k].n_s - points[k].n_f == best) ties.push_back(k);
  return points[ties[(ties.size() - 1) / 2]];
}

void apply_logit_offset(UNet<float>& model, double offset) {
  for (auto& p : model.params())
    if (p.name == "head.bias")
      for (auto& v : p.value.values()) v -= static_cast<float>(offset);
}

namespace {

nlohmann::ordered_json summary_json(const EvalSummary& s) {
  return {{"n_t", s.n_t}, {"n_s", s.n_s}, {"n_f", s.n_f}, {"acc", s.acc}, {"fp", s.fp}};
}

EvalSummary summary_from(const nlohmann::json& j) {
  EvalSummary s;
  s.n_t = j.at("n_t").get<int>();
  s.n_s = j.at("n_s").get<int>();
  s.n_f = j.at("n_f").get<int>();
  s.acc = j.at("acc").get<double>();
  s.fp = j.at("fp").get<double>();
  if (s.n_t < 0 || s.n_s < 0 || s.n_s > s.n_t || s.n_f < 0 || s.n_f > s.n_t)
    throw InvalidArgument("summary counts out of range");
  return s;
}

}  // namespace

std::string report_to_json(const ProtocolReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["seed"] = r.seed;
  j["thresholds"] = {{"detect_distance", r.thresholds.detect_distance},
                     {"fp_distance", r.thresholds.fp_distance},
                     {"min_area", r.thresholds.filter.min_area},
                     {"max_area", r.thresholds.filter.max_area},
                     {"min_separation", r.thresholds.filter.min_separation},
                     {"max_separation", r.thresholds.filter.max_separation}};
  auto trials = nlohmann::ordered_json::array();
  for (const auto& t : r.trials) {
    auto c = nlohmann::ordered_json::array();
    for (const auto& p : t.centroids) c.push_back({p.x, p.y});
    trials.push_back({{"scenario", t.scenario},
                      {"location", t.location},
                      {"legs_detected", t.legs_detected},
                      {"false_positive", t.false_positive},
                      {"centroids", c}});
  }
  j["trials"] = trials;
  j["summary"] = summary_json(r.summary);
  auto per = nlohmann::ordered_json::array();
  for (int s = 0; s < 2; ++s) {
    auto e = summary_json(r.per_scenario[s]);
    e["scenario"] = s + 1;
    per.push_back(e);
  }
  j["per_scenario"] = per;
  return j.dump(2) + "\n";
}

ProtocolReport report_from_json(const std::string& text) {
  ProtocolReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.model = j.at("model").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    const auto& th = j.at("thresholds");
    r.thresholds.detect_distance = th.at("detect_distance").get<double>();
    r.thresholds.fp_distance = th.at("fp_distance").get<double>();
    r.thresholds.filter.min_area = th.at("min_area").get<std::size_t>();
    r.thresholds.filter.max_area = th.at("max_area").get<std::size_t>();
    r.thresholds.filter.min_separation = th.at("min_separation").get<double>();
    r.thresholds.filter.max_separation = th.at("max_separation").get<double>();
    for (const auto& t : j.at("trials")) {
      TrialResult tr;
      tr.scenario = t.at("scenario").get<int>();
      tr.location = t.at("location").get<int>();
      if (tr.scenario < 1 || tr.scenario > 2 || tr.location < 1 || tr.location > 9)
        throw InvalidArgument("trial ids out of range");
      tr.legs_detected = t.at("legs_detected").get<bool>();
      tr.false_positive = t.at("false_positive").get<bool>();
      for (const auto& c : t.at("centroids")) tr.centroids.push_back({c.at(0).get<double>(), c.at(1).get<double>(), 0.0});
      r.trials.push_back(std::move(tr));
    }
    r.summary = summary_from(j.at("summary"));
    const auto& per = j.at("per_scenario");
    if (per.size() != 2) throw InvalidArgument("per_scenario must have two entries");
    for (int s = 0; s < 2; ++s) r.per_scenario[s] = summary_from(per.at(s));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report: ") + e.what(), FormatError::Unit::Line, 1);
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("bad report: ") + e.what(), FormatError::Unit::Line, 1);
  }
  return r;
}

namespace {

std::string ratio(int n, int n_t) { return std::to_string(n) + "/" + std::to_string(n_t); }

std::string pct(int n, int n_t) { return n_t > 0 ? format_percent(n, n_t) + "%" : "-"; }

}  // namespace

std::string format_table(const std::vector<ProtocolReport>& reports) {
  constexpr int kLabel = 14, kCell = 15;
  std::ostringstream os;
  auto cell = [&](const std::string& s, int w) { os << "| " << std::left << std::setw(w) << s << ' '; };
  auto rule = [&]() {
    os << '+' << std::string(kLabel + 2, '-');
    for (std::size_t i = 0; i < reports.size() * 2; ++i) os << '+' << std::string(kCell + 2, '-');
    os << "+\n";
  };
  rule();
  cell("", kLabel);
  for (const auto& r : reports) {
    std::string name = r.model.size() > static_cast<std::size_t>(2 * kCell) ? r.model.substr(0, 2 * kCell) : r.model;
    cell(name, 2 * kCell + 3);
  }
  os << "|\n";
  cell("", kLabel);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    cell("Legs detected", kCell);
    cell("False Positives", kCell);
  }
  os << "|\n";
  rule();
  auto row = [&](const std::string& label, auto&& pick) {
    cell(label, kLabel);
    for (const auto& r : reports) {
      const EvalSummary& s = pick(r);
      cell(ratio(s.n_s, s.n_t), kCell);
      cell(ratio(s.n_f, s.n_t), kCell);
    }
    os << "|\n";
    cell("", kLabel);
    for (const auto& r : reports) {
      const EvalSummary& s = pick(r);
      cell("acc " + pct(s.n_s, s.n_t), kCell);
      cell("FP " + pct(s.n_f, s.n_t), kCell);
    }
    os << "|\n";
  };
  row("All trials", [](const ProtocolReport& r) -> const EvalSummary& { return r.summary; });
  rule();
  row("Scenario 1", [](const ProtocolReport& r) -> const EvalSummary& { return r.per_scenario[0]; });
  row("Scenario 2", [](const ProtocolReport& r) -> const EvalSummary& { return r.per_scenario[1]; });
  rule();
  return os.str();
}

}  // namespace mina
