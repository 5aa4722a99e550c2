#include "mina/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "mina/error.hpp"
#include "mina/eval.hpp"
#include "mina/follow.hpp"
#include "mina/gait.hpp"
#include "mina/model_io.hpp"
#include "mina/scan_io.hpp"
#include "mina/sim.hpp"
#include "mina/train.hpp"

namespace mina {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Segmenter make_segmenter(const std::string& model_path, float threshold, std::string& name) {
  if (model_path.empty()) {
    name = "baseline";
    return [](const OccupancyGrid& g) { return baseline_segment(g); };
  }
  auto model = std::make_shared<UNet<float>>(load_model(model_path));
  name = std::filesystem::path(model_path).filename().string();
  return [model, threshold](const OccupancyGrid& g) { return unet_forward(g, *model, threshold); };
}

std::string truth_json(const std::vector<Trial>& trials) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : trials) {
    nlohmann::ordered_json j;
    j["scenario"] = t.scenario;
    j["location"] = t.location;
    auto legs = nlohmann::ordered_json::array();
    for (int k = 0; k < 2; ++k)
      legs.push_back({{"center", {t.truth.leg_centers[k].x, t.truth.leg_centers[k].y}},
                      {"surface_center", {t.truth.surface_centers[k].x, t.truth.surface_centers[k].y}},
                      {"radius", t.scene.legs[k].radius}});
    j["legs"] = legs;
    auto boxes = nlohmann::ordered_json::array();
    for (const auto& b : t.scene.clutter) boxes.push_back({b.cx, b.cy, b.hx, b.hy, b.yaw});
    j["clutter"] = boxes;
    arr.push_back(j);
  }
  return arr.dump(2) + "\n";
}

std::string pair_name(const char* kind, std::size_t i) {
  char name[48];
  std::snprintf(name, sizeof name, "%s_%04zu.pgm", kind, i);
  return name;
}

/// grid_NNNN.pgm with mask_NNNN.pgm, consecutive from 0000.
std::vector<TrainingPair> read_training_dir(const std::string& dir) {
  std::vector<TrainingPair> data;
  for (std::size_t i = 0;; ++i) {
    const auto grid = std::filesystem::path(dir) / pair_name("grid", i);
    if (!std::filesystem::exists(grid)) break;
    const auto mask = std::filesystem::path(dir) / pair_name("mask", i);
    if (!std::filesystem::exists(mask)) throw InvalidArgument("missing " + mask.string());
    data.push_back({read_grid(grid.string()), read_grid(mask.string())});
  }
  if (data.empty()) throw InvalidArgument("no grid_0000.pgm in '" + dir + "'");
  return data;
}

struct CameraSetup {
  CameraIntrinsics intrinsics;
  RigidTransform camera_to_robot;
};

CameraSetup read_camera(const std::string& transforms_path) {
  const auto transforms = read_transforms(transforms_path);
  const RigidTransform c2r = find_transform(transforms, FrameId::Camera, FrameId::RobotBase);
  CameraIntrinsics k;
  try {
    const auto j = nlohmann::json::parse(read_text(transforms_path));
    if (!j.is_object() || !j.contains("camera"))
      throw InvalidArgument("transforms file has no \"camera\" intrinsics object");
    const auto& c = j.at("camera");
    k.fx = c.at("fx").get<double>();
    k.fy = c.at("fy").get<double>();
    k.cx = c.at("cx").get<double>();
    k.cy = c.at("cy").get<double>();
    k.width = c.at("width").get<int>();
    k.height = c.at("height").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad camera intrinsics: ") + e.what(), FormatError::Unit::Line, 1);
  }
  k.validate();
  return {k, c2r};
}

}  // namespace

int cli_main(int argc, const char* const* argv) { return cli_main(argc, argv, std::cout, std::cerr); }

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Leg segmentation, gait estimation and person following on 2D laser scans", "mina"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate simulated scans (protocol trials or a walking sequence)");
  std::uint64_t sim_seed = 1;
  std::string sim_mode = "protocol", sim_out, sim_truth;
  double sim_duration = 10.0, sim_speed = 0.5, sim_stride = 1.0;
  sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
  int sim_samples = 1000;
  sim->add_option("--mode", sim_mode, "protocol | walk | training")
      ->check(CLI::IsMember({"protocol", "walk", "training"}))
      ->capture_default_str();
  sim->add_option("--out", sim_out, "Scan log (JSONL); output directory in training mode")->required();
  sim->add_option("--samples", sim_samples, "Training pairs (training mode)")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--truth", sim_truth, "Ground truth JSON (protocol mode)");
  sim->add_option("--duration", sim_duration, "Walk duration, s")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--speed", sim_speed, "Walking speed, m/s")->check(CLI::PositiveNumber)->capture_default_str();
  sim->add_option("--stride", sim_stride, "Stride length, m")->check(CLI::PositiveNumber)->capture_default_str();

  // rasterize
  auto* ras = app.add_subcommand("rasterize", "Scan log to occupancy-grid PGMs");
  std::string ras_scans, ras_out_dir;
  int ras_size = 256;
  ras->add_option("--in,--scans", ras_scans, "Scan log (JSONL)")->required();
  ras->add_option("--out-dir", ras_out_dir, "Output directory for grid_NNNN.pgm")->required();
  ras->add_option("--size", ras_size, "Grid side in pixels")->capture_default_str();

  // train
  auto* trn = app.add_subcommand("train", "Train the segmentation network on synthetic grids");
  std::uint64_t trn_seed = 1;
  int trn_samples = 1000;
  int trn_calibration = CalibrationConfig{}.seeds;
  std::string trn_config, trn_out, trn_log, trn_data;
  std::optional<int> trn_epochs;
  std::optional<std::size_t> trn_max_steps;
  trn->add_option("--seed", trn_seed, "Random seed (data and initialization)")->capture_default_str();
  trn->add_option("--data", trn_data, "Directory of grid_NNNN.pgm / mask_NNNN.pgm pairs (default: generate)")
      ->check(CLI::ExistingDirectory);
  trn->add_option("--samples", trn_samples, "Number of synthetic grids")->check(CLI::PositiveNumber)->capture_default_str();
  trn->add_option("--epochs", trn_epochs, "Epochs (overrides config)")->check(CLI::PositiveNumber);
  trn->add_option("--max-steps", trn_max_steps, "Stop after this many optimizer steps");
  trn->add_option("--config", trn_config, "Training config JSON")->check(CLI::ExistingFile);
  trn->add_option("--out", trn_out, "Model file")->required();
  trn->add_option("--log", trn_log, "Per-step loss log (JSONL)");
  trn->add_option("--calibration-seeds", trn_calibration,
                  "Held-out protocol runs used to pick the decision threshold (0 = keep p = 0.5 at logit 0)")
      ->check(CLI::NonNegativeNumber)->capture_default_str();

  // segment
  auto* seg = app.add_subcommand("segment", "Segment legs in an occupancy grid");
  std::string seg_model, seg_grid, seg_out;
  float seg_threshold = 0.5f;
  seg->add_option("--model", seg_model, "Model file (omit for the classical baseline)");
  seg->add_option("--in,--grid", seg_grid, "Occupancy grid PGM")->required();
  seg->add_option("--out", seg_out, "Mask PGM (a .json sidecar is written next to it)")->required();
  seg->add_option("--threshold", seg_threshold, "Probability threshold")->check(CLI::Range(0.0f, 1.0f))->capture_default_str();

  // gait
  auto* gt = app.add_subcommand("gait", "Estimate stride length and velocity from a scan log");
  std::string gt_scans, gt_model, gt_transforms, gt_out, gt_keypoints;
  gt->add_option("--scans", gt_scans, "Scan log (JSONL), optionally with base odometry")->required();
  gt->add_option("--model", gt_model, "Model file (omit for the classical baseline)");
  gt->add_option("--transforms", gt_transforms, "Frame transforms JSON (needs L->R)");
  gt->add_option("--keypoints", gt_keypoints, "Camera keypoint stream (JSONL) used as a presence gate");
  gt->add_option("--out", gt_out, "Gait report JSON")->required();

  // follow
  auto* fol = app.add_subcommand("follow", "Closed-loop person following in simulation");
  std::uint64_t fol_seed = 1;
  double fol_duration = 30.0, fol_speed = 0.5, fol_stride = 1.0;
  std::string fol_out, fol_model, fol_scans;
  fol->add_option("--seed", fol_seed, "Random seed (laser noise)")->capture_default_str();
  fol->add_option("--duration", fol_duration, "Simulated time, s")->check(CLI::PositiveNumber)->capture_default_str();
  fol->add_option("--speed", fol_speed, "Walking speed, m/s")->check(CLI::PositiveNumber)->capture_default_str();
  fol->add_option("--stride", fol_stride, "Stride length, m")->check(CLI::PositiveNumber)->capture_default_str();
  fol->add_option("--model", fol_model, "Model file (omit for the classical baseline)");
  fol->add_option("--out", fol_out, "Trajectory log (JSONL)")->required();
  fol->add_option("--scans-out", fol_scans, "Also write the scans seen in the loop (JSONL)");

  // eval
  auto* ev = app.add_subcommand("eval", "Run the 18-trial protocol and print a comparison table");
  std::uint64_t ev_seed = 1;
  std::string ev_model, ev_out, ev_baseline_out;
  ev->add_option("--seed", ev_seed, "Trial seed")->capture_default_str();
  ev->add_option("--model", ev_model, "Model file (omit to evaluate the baseline only)");
  ev->add_option("--out", ev_out, "JSON report of the evaluated model");
  ev->add_option("--baseline-out", ev_baseline_out, "JSON report of the baseline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim && sim_mode == "training") {
      std::filesystem::create_directories(sim_out);
      const auto data = gen_training_set(sim_samples, sim_seed);
      for (std::size_t i = 0; i < data.size(); ++i) {
        write_grid((std::filesystem::path(sim_out) / pair_name("grid", i)).string(), data[i].grid);
        write_grid((std::filesystem::path(sim_out) / pair_name("mask", i)).string(), data[i].mask);
      }
    } else if (*sim) {
      auto f = open_out(sim_out);
      if (sim_mode == "protocol") {
        const auto trials = gen_protocol_trials(sim_seed);
        for (const auto& t : trials) {
          LaserScan s = trial_scan(t);
          s.timestamp = static_cast<double>(t.location + 9 * (t.scenario - 1));
          f << scan_to_json_line(s) << '\n';
        }
        if (!sim_truth.empty()) open_out(sim_truth) << truth_json(trials);
      } else {
        FollowConfig cfg;
        cfg.walker_speed = sim_speed;
        cfg.walker_stride = sim_stride;
        cfg.duration = sim_duration;
        cfg.world.seed = sim_seed;
        const auto res = run_follow(cfg, [](const OccupancyGrid& g) { return baseline_segment(g); });
        for (const auto& s : res.scans) f << scan_to_json_line(s) << '\n';
      }
    } else if (*ras) {
      GridSpec spec{ras_size};
      spec.validate();
      const auto scans = read_scan_log(ras_scans);
      std::filesystem::create_directories(ras_out_dir);
      for (std::size_t i = 0; i < scans.size(); ++i) {
        write_grid((std::filesystem::path(ras_out_dir) / pair_name("grid", i)).string(), rasterize(scans[i], spec));
      }
    } else if (*trn) {
      TrainConfig tc;
      UNetConfig uc;
      if (!trn_config.empty()) load_train_config(trn_config, tc, uc);
      tc.seed = trn_seed;
      if (trn_epochs) tc.epochs = *trn_epochs;
      if (trn_max_steps) tc.max_steps = *trn_max_steps;
      TrainingSetConfig dc;
      dc.grid.matrix_length = uc.input_size;
      const auto data = trn_data.empty() ? gen_training_set(trn_samples, trn_seed, dc) : read_training_dir(trn_data);
      std::ofstream log;
      if (!trn_log.empty()) log = open_out(trn_log);
      const auto res = train(data, uc, tc, nullptr, [&](const TrainProgress& p) {
        if (log) log << nlohmann::ordered_json{{"step", p.step}, {"epoch", p.epoch}, {"loss", p.loss}}.dump() << '\n';
      });
      UNet<float> model = res.model;
      if (trn_calibration > 0) {
        CalibrationConfig cc;
        cc.seeds = trn_calibration;
        const OperatingPoint op = calibrate_operating_point(model, cc);
        apply_logit_offset(model, op.logit_offset);
        out << "logit offset " << op.logit_offset << ": detected " << op.n_s << "/" << op.n_t
            << ", false positives " << op.n_f << "/" << op.n_t << '\n';
      }
      save_model(trn_out, model);
    } else if (*seg) {
      std::string name;
      const Segmenter s = make_segmenter(seg_model, seg_threshold, name);
      SegmentationMask mask = s(read_grid(seg_grid));
      mask.threshold = seg_threshold;
      write_mask(seg_out, mask);
    } else if (*gt) {
      std::string name;
      const Segmenter s = make_segmenter(gt_model, 0.5f, name);
      RigidTransform l2r = default_laser_mount();
      std::optional<CameraSetup> camera;
      if (!gt_transforms.empty()) {
        l2r = find_transform(read_transforms(gt_transforms), FrameId::Laser, FrameId::RobotBase);
        if (!gt_keypoints.empty()) camera = read_camera(gt_transforms);
      } else if (!gt_keypoints.empty()) {
        throw InvalidArgument("--keypoints needs --transforms with a C->R transform and camera intrinsics");
      }
      std::vector<Keypoint3D> keypoints;
      if (camera) keypoints = keypoints_to_robot_frame(read_keypoint_log(gt_keypoints), camera->intrinsics,
                                                       camera->camera_to_robot);
      const auto scans = read_scan_log(gt_scans);
      std::vector<LegObservation> stream;
      for (const auto& scan : scans) {
        LegObservation obs = perceive_legs(scan, s, l2r);
        if (camera) obs = apply_camera_gate(obs, keypoints);
        if (scan.base) obs = to_odometry_frame(obs, *scan.base);
        stream.push_back(obs);
      }
      const GaitReport report = estimate_gait(track_legs(stream));
      open_out(gt_out) << gait_report_to_json(report);
    } else if (*fol) {
      FollowConfig cfg;
      cfg.walker_speed = fol_speed;
      cfg.walker_stride = fol_stride;
      cfg.duration = fol_duration;
      cfg.world.seed = fol_seed;
      std::string name;
      const auto res = run_follow(cfg, make_segmenter(fol_model, 0.5f, name));
      auto f = open_out(fol_out);
      for (const auto& r : res.trajectory) f << trajectory_record_to_json(r) << '\n';
      if (!fol_scans.empty()) {
        auto fs = open_out(fol_scans);
        for (const auto& sc : res.scans) fs << scan_to_json_line(sc) << '\n';
      }
    } else if (*ev) {
      const auto trials = gen_protocol_trials(ev_seed);
      std::vector<ProtocolReport> reports;
      std::string name;
      reports.push_back(run_protocol(make_segmenter("", 0.5f, name), trials, name, ev_seed));
      if (!ev_model.empty()) reports.push_back(run_protocol(make_segmenter(ev_model, 0.5f, name), trials, name, ev_seed));
      out << format_table(reports);
      if (!ev_out.empty()) open_out(ev_out) << report_to_json(reports.back());
      if (!ev_baseline_out.empty()) open_out(ev_baseline_out) << report_to_json(reports.front());
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace mina
