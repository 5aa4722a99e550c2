// Acceptance runner: one PASS/FAIL line per criterion, exit 0 only if all pass.
#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "mina/cli.hpp"
#include "mina/error.hpp"
#include "mina/eval.hpp"
#include "mina/follow.hpp"
#include "mina/gait.hpp"
#include "mina/model_io.hpp"
#include "mina/raster.hpp"
#include "mina/scan_io.hpp"
#include "mina/sim.hpp"
#include "mina/train.hpp"

using namespace mina;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  Outcome() { detail << std::fixed << std::setprecision(1); }

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, Outcome& o, double secs) {
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << "  #" << id << " " << name << "  (" << std::fixed
            << std::setprecision(1) << secs << " s)" << o.detail.str() << std::endl;
}

template <typename F>
void criterion(int id, const std::string& name, F&& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  report(id, name, o, seconds_since(t0));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

struct CliRun {
  int code = 0;
  std::string out, err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mina");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

/// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

double mask_iou(const std::vector<TrainingPair>& held_out, const UNet<float>& model) {
  std::size_t inter = 0, uni = 0;
  for (const auto& p : held_out) {
    const SegmentationMask m = unet_forward(p.grid, model);
    for (int x = 0; x < p.grid.size(); ++x)
      for (int y = 0; y < p.grid.size(); ++y) {
        const bool a = m.on(x, y), b = p.mask.occupied(x, y);
        inter += a && b;
        uni += a || b;
      }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

template <typename F>
bool throws_format(F&& f, FormatError::Unit unit, std::uint64_t location, std::string& seen) {
  try {
    f();
  } catch (const FormatError& e) {
    seen = e.what();
    return e.unit() == unit && e.location() == location;
  } catch (const std::exception& e) {
    seen = std::string("wrong error class: ") + e.what();
    return false;
  }
  seen = "no error";
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks", "acceptance"};
  std::string model_path, save_path, work_dir = (fs::temp_directory_path() / "mina_acceptance").string();
  app.add_option("--model", model_path, "Use this trained model instead of running the default training")
      ->check(CLI::ExistingFile);
  app.add_option("--save-model", save_path, "Where to write the trained model");
  app.add_option("--work-dir", work_dir, "Scratch directory")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(work_dir);
  fs::create_directories(work_dir);
  const fs::path work(work_dir);

  criterion(1, "metric reproduction", [](Outcome& o) {
    const std::string got[] = {format_percent(14, 18), format_percent(17, 18), format_percent(7, 18),
                               format_percent(1, 18)};
    const std::string want[] = {"77.7", "94.4", "38.8", "5.5"};
    for (int i = 0; i < 4; ++i) o.require(got[i] == want[i], got[i] + " != " + want[i]);
    o.detail << " " << got[0] << " " << got[1] << " " << got[2] << " " << got[3];
  });

  criterion(2, "rasterizer hand traces and round trip", [](Outcome& o) {
    auto single = [](double angle, double d) {
      LaserScan s;
      s.angle_min = angle;
      s.angle_increment = 0.01;
      s.range_max = 20.0;
      s.ranges = {d};
      return rasterize(s);
    };
    const auto a = single(0.0, 0.5);
    o.require(a.at(178, 128) == 255 && a.count_occupied() == 1, "angle 0, 0.5 m -> (178, 128)");
    const auto b = single(std::numbers::pi / 2, 0.3);
    o.require(b.at(128, 158) == 255 && b.count_occupied() == 1, "angle pi/2, 0.3 m -> (128, 158)");
    o.require(single(0.0, 5.0).count_occupied() == 0, "5 m beam dropped");
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.275, 1.275);
    const GridSpec spec;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
      const double x = u(rng), y = u(rng);
      const auto px = pixel_of(x, y, spec);
      if (!px) {
        o.require(false, "in-grid point fell outside");
        return;
      }
      const Point3 p = deproject_cell(px->px, px->py, spec);
      worst = std::max(worst, std::hypot(p.x - x, p.y - y));
    }
    o.require(worst <= 0.01, "round trip error " + std::to_string(worst));
    o.detail << " worst round trip " << std::setprecision(4) << worst << " m";
  });

  criterion(3, "gradient correctness", [](Outcome& o) {
    const auto t0 = Clock::now();
    const auto results = gradcheck::run_all(20, 77);
    double worst = 0.0;
    for (const auto& r : results) {
      o.require(r.cases >= 20, r.op + " has only " + std::to_string(r.cases) + " cases");
      o.require(r.worst < 1e-5, r.op + " relative error " + std::to_string(r.worst));
      worst = std::max(worst, r.worst);
    }
    const double secs = seconds_since(t0);
    o.require(secs < 60.0, "took " + std::to_string(secs) + " s");
    o.detail << " " << results.size() << " ops, worst relative error " << std::scientific << std::setprecision(2)
             << worst << std::fixed;
  });

  // The trained model feeds #4, #5 and #7.
  std::optional<UNet<float>> model;
  Outcome training;
  const auto train_t0 = Clock::now();
  try {
    if (!model_path.empty()) {
      model = load_model(model_path);
      training.detail << " loaded " << model_path;
    } else {
      const auto data = gen_training_set(1000, 1);
      const auto validation = gen_training_set(50, 1001);
      const TrainConfig cfg;
      auto res = train(data, UNetConfig{}, cfg, &validation);
      const OperatingPoint op = calibrate_operating_point(res.model);
      apply_logit_offset(res.model, op.logit_offset);
      const double secs = seconds_since(train_t0);
      training.detail << " trained and calibrated in " << std::setprecision(0) << secs << " s, "
                      << res.loss_history.size() << " steps, logit offset " << std::setprecision(2)
                      << op.logit_offset;
      training.require(secs < 15 * 60, "training took over 15 min");
      const double v0 = res.validation_history.front(), v1 = res.validation_history.back();
      training.detail << ", validation loss " << std::setprecision(5) << v0 << " -> " << v1;
      training.require(v1 * 5.0 <= v0, "validation loss fell less than 5x");
      // 10-step window means; the trend over windows must be downward throughout.
      std::vector<double> windows;
      for (std::size_t s = 0; s + 10 <= res.loss_history.size(); s += 10) {
        double sum = 0.0;
        for (std::size_t k = s; k < s + 10; ++k) sum += res.loss_history[k];
        windows.push_back(sum / 10.0);
      }
      const std::size_t q = windows.size() / 4;
      bool down = q > 0;
      for (std::size_t k = 1; down && k < 4; ++k) {
        double prev = 0.0, cur = 0.0;
        for (std::size_t i = 0; i < q; ++i) {
          prev += windows[(k - 1) * q + i];
          cur += windows[k * q + i];
        }
        down = cur < prev;
      }
      training.require(down, "smoothed loss is not decreasing across quarters");
      model = std::move(res.model);
      if (!save_path.empty()) save_model(save_path, *model);
    }
    const double iou = mask_iou(gen_training_set(20, 4242), *model);
    training.detail << ", held-out IoU " << std::setprecision(3) << iou;
    training.require(iou >= 0.5, "held-out IoU below 0.5");
  } catch (const std::exception& e) {
    training.require(false, std::string("exception: ") + e.what());
  }
  std::cout << (training.pass ? "PASS" : "FAIL") << "  training run" << training.detail.str() << std::endl;
  if (!training.pass) ++failures;
  const fs::path model_file = work / "model.bin";
  if (model) save_model(model_file.string(), *model);
  const Segmenter trained = [&](const OccupancyGrid& g) { return unet_forward(g, *model); };
  const Segmenter baseline = [](const OccupancyGrid& g) { return baseline_segment(g); };

  criterion(4, "protocol: detected >= 16/18, FP <= 2/18, dominates baseline in clutter", [&](Outcome& o) {
    if (!model) throw Error("no trained model");
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto trials = gen_protocol_trials(seed);
      const auto m = run_protocol(trained, trials, "unet", seed);
      const auto b = run_protocol(baseline, trials, "baseline", seed);
      const auto &ms = m.per_scenario[1], &bs = b.per_scenario[1];
      o.detail << " | seed " << seed << ": det " << m.summary.n_s << " fp " << m.summary.n_f << ", clutter "
               << ms.n_s << "/" << ms.n_f << " vs baseline " << bs.n_s << "/" << bs.n_f;
      o.require(m.summary.n_s >= 16, "seed " + std::to_string(seed) + " detected");
      o.require(m.summary.n_f <= 2, "seed " + std::to_string(seed) + " false positives");
      o.require(ms.n_s > bs.n_s && ms.n_f < bs.n_f, "seed " + std::to_string(seed) + " clutter dominance");
    }
  });

  criterion(5, "gait oracle through the trained pipeline", [&](Outcome& o) {
    if (!model) throw Error("no trained model");
    const auto t0 = Clock::now();
    const std::pair<double, double> cases[] = {{0.3, 0.6}, {0.5, 1.0}, {0.8, 1.2}};
    for (const auto& [speed, stride] : cases) {
      FollowConfig cfg;
      cfg.walker_speed = speed;
      cfg.walker_stride = stride;
      cfg.duration = 15.0;
      cfg.world.seed = 11;
      const auto res = run_follow(cfg, trained);
      const GaitReport g = estimate_gait(track_legs(res.observations));
      const double el = std::abs(g.stride_length - stride) / stride;
      const double ev = std::abs(g.stride_velocity - speed) / speed;
      o.detail << " | " << speed << "/" << stride << ": " << std::setprecision(3) << g.stride_length << " m, "
               << g.stride_velocity << " m/s" << std::setprecision(1);
      o.require(el <= 0.10 && ev <= 0.10, "case " + std::to_string(speed) + " outside 10%");
    }
    const double secs = seconds_since(t0);
    o.require(secs < 120.0, "took " + std::to_string(secs) + " s");
  });

  criterion(6, "closed-loop follow at 0.5 m/s", [&](Outcome& o) {
    if (!model) throw Error("no trained model");
    const auto t0 = Clock::now();
    FollowConfig cfg;
    cfg.world.seed = 5;
    const auto res = run_follow(cfg, trained);
    const auto& c = cfg.controller;
    double worst = 0.0;
    bool saturated = true;
    for (const auto& r : res.trajectory) {
      saturated &= std::hypot(r.cmd.vx, r.cmd.vy) <= c.v_max + 1e-12 && std::abs(r.cmd.omega) <= c.omega_max + 1e-12;
      if (r.t < 5.0) continue;
      const double d = std::hypot(r.person.x - r.base.x, r.person.y - r.base.y);
      worst = std::max(worst, std::abs(d - c.standoff));
    }
    o.require(!res.trajectory.empty() && res.trajectory.back().t >= 29.9, "simulation shorter than 30 s");
    o.require(worst <= 0.15, "distance error " + std::to_string(worst));
    o.require(saturated, "command saturation violated");
    const double secs = seconds_since(t0);
    o.require(secs < 30.0, "took " + std::to_string(secs) + " s");
    o.detail << " worst |distance - standoff| " << std::setprecision(3) << worst << " m after 5 s";
  });

  criterion(7, "CLI determinism", [&](Outcome& o) {
    if (!model) throw Error("no trained model");
    auto session = [&](const fs::path& d) {
      fs::create_directories(d);
      auto p = [&](const char* name) { return (d / name).string(); };
      std::vector<CliRun> runs;
      runs.push_back(run_cli({"simulate", "--seed", "4", "--out", p("protocol.jsonl"), "--truth", p("truth.json")}));
      runs.push_back(run_cli({"simulate", "--mode", "walk", "--seed", "4", "--duration", "12", "--out", p("walk.jsonl")}));
      runs.push_back(run_cli({"simulate", "--mode", "training", "--seed", "4", "--samples", "4", "--out", p("train")}));
      runs.push_back(run_cli({"rasterize", "--in", p("protocol.jsonl"), "--out-dir", p("grids")}));
      runs.push_back(run_cli({"train", "--seed", "4", "--data", p("train"), "--max-steps", "3", "--calibration-seeds", "1", "--out", p("m.bin"),
                              "--log", p("train_log.jsonl")}));
      runs.push_back(run_cli({"segment", "--model", model_file.string(), "--in", p("grids/grid_0004.pgm"), "--out",
                              p("mask.pgm")}));
      runs.push_back(run_cli({"gait", "--scans", p("walk.jsonl"), "--model", model_file.string(), "--out", p("gait.json")}));
      runs.push_back(run_cli({"follow", "--seed", "4", "--duration", "8", "--model", model_file.string(), "--out",
                              p("follow.jsonl"), "--scans-out", p("follow_scans.jsonl")}));
      runs.push_back(run_cli({"eval", "--seed", "4", "--model", model_file.string(), "--out", p("eval.json"),
                              "--baseline-out", p("baseline.json")}));
      std::string text;
      for (const auto& r : runs) {
        if (r.code != 0) o.require(false, "subcommand failed: " + r.err);
        text += r.out;
      }
      spit(d / "stdout.txt", text);
      return snapshot(d);
    };
    const auto a = session(work / "det_a");
    const auto b = session(work / "det_b");
    o.require(a.size() == b.size(), "different file sets");
    for (const auto& [name, bytes] : a) {
      const auto it = b.find(name);
      o.require(it != b.end() && it->second == bytes, name + " differs");
    }
    o.detail << " " << a.size() << " output files compared across 7 subcommands";
  });

  criterion(8, "format robustness", [&](Outcome& o) {
    std::string seen;
    // PGM: a value outside {0, 255} at a known offset, then a truncated body.
    OccupancyGrid g;
    g.set(3, 4, true);
    const fs::path pgm = work / "good.pgm";
    write_grid(pgm.string(), g);
    std::string bytes = slurp(pgm);
    const std::size_t header = bytes.size() - 256 * 256;
    const std::size_t bad_at = header + 1000;
    bytes[bad_at] = 7;
    spit(work / "bad_value.pgm", bytes);
    o.require(throws_format([&] { read_grid((work / "bad_value.pgm").string()); }, FormatError::Unit::Byte, bad_at, seen),
              "pgm value: " + seen);
    spit(work / "short.pgm", slurp(pgm).substr(0, header + 100));
    o.require(throws_format([&] { read_grid((work / "short.pgm").string()); }, FormatError::Unit::Byte, header + 100, seen),
              "pgm truncation: " + seen);

    // Model: bad magic at 0, truncation inside the weights.
    const auto raw = serialize_model(UNet<float>(UNetConfig{}, 3));
    const std::string model_bytes(raw.begin(), raw.end());
    std::string bad_magic = model_bytes;
    bad_magic[2] = 'X';
    spit(work / "magic.bin", bad_magic);
    o.require(throws_format([&] { load_model((work / "magic.bin").string()); }, FormatError::Unit::Byte, 0, seen),
              "model magic: " + seen);
    const std::size_t cut = model_bytes.size() / 2;
    spit(work / "cut.bin", model_bytes.substr(0, cut));
    try {
      load_model((work / "cut.bin").string());
      o.require(false, "truncated model loaded");
    } catch (const FormatError& e) {
      o.require(e.unit() == FormatError::Unit::Byte && e.location() <= cut, "model truncation location");
    }

    // JSONL: line 3 malformed.
    LaserScan s;
    s.angle_min = 0.0;
    s.angle_increment = 0.01;
    s.range_max = 20.0;
    s.ranges = {1.0, 1.1};
    const std::string line = scan_to_json_line(s) + "\n";
    spit(work / "bad.jsonl", line + line + "{\"ranges\": [1.0, \n" + line);
    o.require(throws_format([&] { read_scan_log((work / "bad.jsonl").string()); }, FormatError::Unit::Line, 3, seen),
              "jsonl: " + seen);

    // Through the CLI: exit 2, location in the message, no output written.
    const auto seg = run_cli({"segment", "--model", (work / "cut.bin").string(), "--in", pgm.string(), "--out",
                              (work / "partial_mask.pgm").string()});
    o.require(seg.code == 2 && seg.err.find("byte offset") != std::string::npos, "segment with truncated model");
    o.require(!fs::exists(work / "partial_mask.pgm"), "segment left a partial mask");
    const auto ras = run_cli({"rasterize", "--in", (work / "bad.jsonl").string(), "--out-dir",
                              (work / "partial_grids").string()});
    o.require(ras.code == 2 && ras.err.find("line 3") != std::string::npos, "rasterize with bad JSONL");
    o.require(!fs::exists(work / "partial_grids"), "rasterize left partial grids");
    const auto gait = run_cli({"gait", "--scans", (work / "bad.jsonl").string(), "--out", (work / "partial_gait.json").string()});
    o.require(gait.code == 2 && !fs::exists(work / "partial_gait.json"), "gait with bad JSONL");
    const auto seg2 = run_cli({"segment", "--in", (work / "bad_value.pgm").string(), "--out",
                               (work / "partial_mask2.pgm").string()});
    o.require(seg2.code == 2 && seg2.err.find("byte offset " + std::to_string(bad_at)) != std::string::npos &&
                  !fs::exists(work / "partial_mask2.pgm"),
              "segment with corrupted grid");
    o.detail << " pgm, model and jsonl fixtures rejected with locations";
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
