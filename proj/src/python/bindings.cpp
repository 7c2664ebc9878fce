#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "iidlab/cli.hpp"
#include "iidlab/error.hpp"
#include "iidlab/gradcheck.hpp"
#include "iidlab/metrics.hpp"
#include "iidlab/priors.hpp"
#include "iidlab/signet.hpp"
#include "iidlab/synthgen.hpp"

namespace py = pybind11;
using namespace iid;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

template <int C>
py::array_t<float> to_numpy(const Raster<C>& img) {
  std::vector<py::ssize_t> shape = {img.height(), img.width()};
  if (C > 1) shape.push_back(C);
  py::array_t<float> out(shape);
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

template <int C>
Raster<C> from_numpy(const FloatArray& a) {
  const bool ok = C == 1 ? a.ndim() == 2 : a.ndim() == 3 && a.shape(2) == C;
  if (!ok) throw Error(ErrorCode::SizeMismatch, "expected an array of shape (H, W" + std::string(C == 1 ? ")" : ", 3)"));
  Raster<C> img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.data().begin());
  return img;
}

SegmentMap segments_from_numpy(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw Error(ErrorCode::SizeMismatch, "segments must be a 2-D integer array");
  return SegmentMap::from_raw(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                              std::span<const std::int64_t>(a.data(), static_cast<size_t>(a.size())));
}

py::array_t<std::int32_t> labels_to_numpy(const SegmentMap& seg) {
  py::array_t<std::int32_t> out({seg.height(), seg.width()});
  std::copy(seg.labels().begin(), seg.labels().end(), out.mutable_data());
  return out;
}

py::dict sample_scene(const py::dict& config, std::uint64_t index) {
  const auto json_text = py::module_::import("json").attr("dumps")(config).cast<std::string>();
  const synth::SynthConfig cfg = synth::synth_config_from_json(nlohmann::json::parse(json_text));
  const IntrinsicSample s = synth::sample_scene(cfg, index);
  py::list classes;
  for (auto c : s.segments.classes()) classes.append(std::string(to_string(c)));
  py::dict d;
  d["image"] = to_numpy(s.image);
  d["reflectance"] = to_numpy(s.reflectance);
  d["shading"] = to_numpy(s.shading);
  d["segments"] = labels_to_numpy(s.segments);
  d["classes"] = classes;
  return d;
}

py::dict priors_of(const FloatArray& image, const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& segments,
                   float eps) {
  const auto b = priors::compute_bundle(from_numpy<3>(image), segments_from_numpy(segments), eps);
  py::dict d;
  d["r_est"] = to_numpy(b.r_est);
  d["s_est"] = to_numpy(b.s_est);
  d["nrgb"] = to_numpy(b.nrgb);
  d["ccr_strength"] = to_numpy(b.ccr.strength);
  return d;
}

template <int C>
py::dict score_pair(const FloatArray& pred, const FloatArray& gt) {
  const auto p = from_numpy<C>(pred), g = from_numpy<C>(gt);
  py::dict d;
  d["mse"] = metrics::mse(p, g);
  d["si_mse"] = metrics::si_mse(p, g);
  d["lmse"] = metrics::lmse(p, g);
  d["dssim"] = metrics::dssim_metric(p, g);
  return d;
}

double whdr(const FloatArray& reflectance, const std::string& judgments_json) {
  return metrics::whdr(from_numpy<3>(reflectance), metrics::JudgmentSet::from_json(nlohmann::json::parse(judgments_json)));
}

std::vector<py::dict> gradcheck(std::uint64_t seed, bool include_network) {
  gc::SuiteOptions opt;
  opt.seed = seed;
  opt.include_network = include_network;
  std::vector<py::dict> out;
  for (const auto& r : gc::run_suite(opt)) {
    py::dict d;
    d["name"] = r.name;
    d["cases"] = r.cases;
    d["max_error"] = r.max_error;
    d["tolerance"] = r.tolerance;
    d["passed"] = r.passed;
    out.push_back(d);
  }
  return out;
}

std::string architecture(int base_width, int input_size, std::uint64_t seed) {
  net::ModelConfig cfg;
  cfg.base_width = base_width;
  cfg.input_size = input_size;
  cfg.seed = seed;
  cfg.validate();
  net::SigNet<float> net(cfg);
  return net.architecture_report().dump();
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"iidlab"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = 0;
  {
    py::gil_scoped_release release;
    code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_iidlab, m) {
  m.doc() = "Intrinsic image decomposition toolkit";
  m.attr("__version__") = "0.1.0";

  py::exception<Error>(m, "IidError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::module_::import("iidlab._iidlab").attr("IidError");
      py::object exc = type(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  m.def("sample_scene", &sample_scene, py::arg("config") = py::dict(), py::arg("index") = 0);
  m.def("priors", &priors_of, py::arg("image"), py::arg("segments"), py::arg("eps") = priors::kDefaultEps);
  m.def("score_rgb", &score_pair<3>, py::arg("pred"), py::arg("gt"));
  m.def("score_gray", &score_pair<1>, py::arg("pred"), py::arg("gt"));
  m.def("whdr", &whdr, py::arg("reflectance"), py::arg("judgments_json"));
  m.def("gradcheck", &gradcheck, py::arg("seed") = 0, py::arg("include_network") = false);
  m.def("architecture_json", &architecture, py::arg("base_width") = 8, py::arg("input_size") = 64,
        py::arg("seed") = 0);
  m.def("run_cli", &run_cli, py::arg("args"));
}
