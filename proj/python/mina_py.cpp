#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "mina/cli.hpp"
#include "mina/error.hpp"
#include "mina/eval.hpp"
#include "mina/follow.hpp"
#include "mina/model_io.hpp"
#include "mina/raster.hpp"
#include "mina/sim.hpp"

namespace py = pybind11;
using namespace mina;

namespace {

using GridArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

py::array_t<std::uint8_t> grid_to_array(const OccupancyGrid& g) {
  py::array_t<std::uint8_t> a({g.size(), g.size()});
  std::memcpy(a.mutable_data(), g.pixels().data(), g.pixels().size());
  return a;
}

OccupancyGrid array_to_grid(const GridArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ShapeError("grid must be a square 2-D array");
  const auto n = static_cast<int>(a.shape(0));
  std::vector<std::uint8_t> px(a.data(), a.data() + a.size());
  return OccupancyGrid(GridSpec{n}, std::move(px));
}

py::array_t<float> mask_to_array(const SegmentationMask& m) {
  py::array_t<float> a({m.size, m.size});
  std::memcpy(a.mutable_data(), m.prob.data(), m.prob.size() * sizeof(float));
  return a;
}

LaserScan make_scan(const std::vector<double>& ranges, double angle_min, double angle_increment,
                    double range_max) {
  LaserScan s;
  s.ranges = ranges;
  s.angle_min = angle_min;
  s.angle_increment = angle_increment;
  s.range_max = range_max;
  return s;
}

}  // namespace

PYBIND11_MODULE(mina, m) {
  m.doc() = "Laser leg segmentation, gait estimation and person following";

  py::register_exception<Error>(m, "Error");
  py::register_exception<FormatError>(m, "FormatError", m.attr("Error"));
  py::register_exception<ShapeError>(m, "ShapeError", m.attr("Error"));
  py::register_exception<InvalidArgument>(m, "InvalidArgument", m.attr("Error"));
  py::register_exception<InsufficientData>(m, "InsufficientData", m.attr("Error"));

  m.def("accuracy", &accuracy, py::arg("n_s"), py::arg("n_t"));
  m.def("fp_rate", &fp_rate, py::arg("n_f"), py::arg("n_t"));
  m.def("format_percent", &format_percent, py::arg("n"), py::arg("n_t"));

  m.def(
      "rasterize",
      [](const std::vector<double>& ranges, double angle_min, double angle_increment, double range_max,
         int size) { return grid_to_array(rasterize(make_scan(ranges, angle_min, angle_increment, range_max), GridSpec{size})); },
      py::arg("ranges"), py::arg("angle_min"), py::arg("angle_increment"), py::arg("range_max"),
      py::arg("size") = 256);
  m.def(
      "deproject_cell",
      [](double px, double py_, int size) {
        const Point3 p = deproject_cell(px, py_, GridSpec{size});
        return py::make_tuple(p.x, p.y, p.z);
      },
      py::arg("pixel_x"), py::arg("pixel_y"), py::arg("size") = 256);

  m.def(
      "protocol_scans",
      [](std::uint64_t seed) {
        py::list out;
        for (const auto& t : gen_protocol_trials(seed)) {
          const LaserScan s = trial_scan(t);
          py::dict d;
          d["scenario"] = t.scenario;
          d["location"] = t.location;
          d["angle_min"] = s.angle_min;
          d["angle_increment"] = s.angle_increment;
          d["range_max"] = s.range_max;
          d["ranges"] = s.ranges;
          d["truth_mask"] = grid_to_array(t.truth.mask);
          out.append(d);
        }
        return out;
      },
      py::arg("seed"), "The 18 protocol trials as scans plus ground-truth masks.");

  m.def("baseline_segment", [](const GridArray& g) { return mask_to_array(baseline_segment(array_to_grid(g))); },
        py::arg("grid"));

  py::class_<UNet<float>>(m, "Model")
      .def(py::init([](std::uint64_t seed) { return UNet<float>(UNetConfig{}, seed); }), py::arg("seed") = 1)
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const UNet<float>& net, const std::string& path) { save_model(path, net); }, py::arg("path"))
      .def_property_readonly("parameter_count", &UNet<float>::parameter_count)
      .def(
          "segment",
          [](const UNet<float>& net, const GridArray& g) { return mask_to_array(unet_forward(array_to_grid(g), net)); },
          py::arg("grid"));

  m.def(
      "compute_command",
      [](double vx, double vy, double px, double py_) {
        const VelocityCommand c = compute_command({vx, vy, 0.0}, {px, py_, 0.0});
        return py::make_tuple(c.vx, c.vy, c.omega);
      },
      py::arg("vx"), py::arg("vy"), py::arg("person_x"), py::arg("person_y"),
      "One command from a fresh controller with default gains; inputs in the base frame.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"mina"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return cli_main(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
