// Python bindings. Tensors cross the boundary as float64 numpy arrays.
#include <memory>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "json.hpp"
#include "swf/analysis.hpp"
#include "swf/cli.hpp"
#include "swf/config.hpp"
#include "swf/errors.hpp"
#include "swf/model.hpp"
#include "swf/neurons.hpp"
#include "swf/wavelet.hpp"

namespace py = pybind11;
using namespace swf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseTensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return DenseTensor(std::move(shape), std::vector<Real>(a.data(), a.data() + a.size()));
}

Array to_array(const DenseTensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array a(shape);
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

Polarity polarity_from(const std::string& s) {
  if (s == "binary") return Polarity::binary;
  if (s == "ternary") return Polarity::ternary;
  throw ConfigError("polarity must be 'binary' or 'ternary', got '" + s + "'");
}

// nlohmann::json <-> Python objects through the json text form.
py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict trace_maps(const LayerActivationTrace& trace) {
  py::dict d;
  for (const auto& [name, map] : trace.maps) d[py::str(name)] = to_array(map);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spiking wavelet transformer core";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  m.def(
      "haar_matrix", [](std::size_t side) { return to_array(haar_matrix_for_side(side).m); }, py::arg("side"),
      "Orthonormal Haar matrix for a power-of-two side.");
  m.def(
      "haar2d", [](const Array& x) {
        const DenseTensor t = to_tensor(x);
        return to_array(haar2d_forward_exact(t, haar_matrix_for_side(t.shape().back())).decoded());
      },
      py::arg("x"), "Exact 2D Haar transform over the last two axes.");
  m.def(
      "ihaar2d", [](const Array& c) {
        const DenseTensor t = to_tensor(c);
        return to_array(haar2d_inverse_exact(t, haar_matrix_for_side(t.shape().back())));
      },
      py::arg("coeffs"), "Inverse of haar2d.");
  m.def(
      "spiking_round_trip",
      [](const Array& image, std::size_t timesteps, Real v_th, const std::string& polarity) {
        return to_array(spiking_round_trip(to_tensor(image), timesteps, v_th, polarity_from(polarity)));
      },
      py::arg("image"), py::arg("timesteps"), py::arg("v_th") = 1.0, py::arg("polarity") = "ternary");
  m.def(
      "psnr", [](const Array& ref, const Array& rec, Real peak) { return psnr(to_tensor(ref), to_tensor(rec), peak); },
      py::arg("reference"), py::arg("reconstruction"), py::arg("peak") = 1.0);

  m.def(
      "lif", [](const Array& inputs, Real v_th, Real beta) {
        return to_array(run_sequence(NeuronConfig::lif(v_th, beta), to_tensor(inputs)).to_dense());
      },
      py::arg("inputs"), py::arg("v_th") = 1.0, py::arg("beta") = 0.5,
      "Spike train of a LIF population; inputs are [T, ...].");
  m.def(
      "integrate_and_fire", [](const Array& inputs, Real v_th, const std::string& polarity) {
        return to_array(
            run_sequence(NeuronConfig::integrate_and_fire(v_th, polarity_from(polarity)), to_tensor(inputs)).to_dense());
      },
      py::arg("inputs"), py::arg("v_th") = 1.0, py::arg("polarity") = "ternary");

  m.def(
      "spectrum", [](const Array& maps) {
        const SpectrumProfile p = spectrum_of(to_tensor(maps));
        py::list delta;
        for (const auto& d : p.delta) delta.append(d ? py::float_(*d) : py::float_(-INFINITY));
        return py::make_tuple(p.frequency, delta);
      },
      py::arg("maps"), "Radial log-amplitude profile of [T, B, C, S, S] maps relative to DC.");

  m.def(
      "default_config", [] { return json_to_py(run_config_to_json(RunConfig{})); },
      "Default run configuration as a dict.");
  m.def(
      "load_config", [](const std::filesystem::path& p) { return json_to_py(run_config_to_json(load_run_config(p))); },
      py::arg("path"), "Loads and validates a run configuration file.");

  m.def(
      "cli", [](const std::vector<std::string>& args) {
        std::vector<std::string> argv{"swf"};
        argv.insert(argv.end(), args.begin(), args.end());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = parse_and_dispatch(argv, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line tool in-process; returns (exit_code, stdout, stderr).");

  py::class_<SWformer>(m, "SWformer")
      .def(py::init([](const py::object& model_config, std::uint64_t seed) {
             return std::make_unique<SWformer>(model_config_from_json(py_to_json(model_config)), seed);
           }),
           py::arg("model_config"), py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& dir) { return std::make_unique<SWformer>(SWformer::load(dir)); },
          py::arg("checkpoint_dir"))
      .def("save", &SWformer::save, py::arg("checkpoint_dir"))
      .def_property_readonly("config", [](const SWformer& s) { return json_to_py(model_config_to_json(s.config())); })
      .def("param_count", &SWformer::param_count)
      .def("fl_param_count", &SWformer::fl_param_count)
      .def("param_names",
           [](SWformer& s) {
             std::vector<std::string> names;
             for (const Param* p : s.params()) names.push_back(p->name);
             return names;
           })
      .def(
          "forward",
          [](SWformer& s, const Array& images, bool training) {
            const DenseTensor x = to_tensor(images);
            DenseTensor logits;
            {
              py::gil_scoped_release release;
              logits = s.forward(x, training);
            }
            return to_array(logits);
          },
          py::arg("images"), py::arg("training") = false, "images are [T, B, C, H, W]; returns logits [B, classes].")
      .def(
          "trace",
          [](SWformer& s, const Array& images) {
            const DenseTensor x = to_tensor(images);
            LayerActivationTrace trace;
            DenseTensor logits;
            {
              py::gil_scoped_release release;
              logits = s.forward(x, false, &trace);
            }
            const EnergyReport energy = count_sops(trace, s.config());
            return py::make_tuple(to_array(logits), trace_maps(trace), json_to_py(energy.to_json()));
          },
          py::arg("images"), "Eval-mode forward returning (logits, feature maps by layer, energy report).");
}
