#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "gravinv/bulakh.hpp"
#include "gravinv/cli.hpp"
#include "gravinv/detect.hpp"
#include "gravinv/errors.hpp"
#include "gravinv/forward.hpp"
#include "gravinv/invert.hpp"
#include "gravinv/synth.hpp"

namespace py = pybind11;
using namespace gravinv;

namespace {

std::string repr_spheroid(const Spheroid& s) {
  std::ostringstream os;
  os << "Spheroid(a=" << s.a << ", eps=" << s.eps << ", rho=" << s.rho << ", x0=" << s.x0
     << ", y0=" << s.y0 << ", z0=" << s.z0 << ")";
  return os.str();
}

}  // namespace

PYBIND11_MODULE(_gravinv, m) {
  m.doc() = "Gravity inversion for ore bodies approximated by spheroids";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<EstimationError>(m, "EstimationError", base.ptr());

  m.attr("GAMMA") = kGamma;

  py::class_<Station>(m, "Station")
      .def(py::init([](double x, double y, std::optional<double> vz) { return Station{x, y, vz}; }),
           py::arg("x"), py::arg("y"), py::arg("vz") = py::none())
      .def_readwrite("x", &Station::x)
      .def_readwrite("y", &Station::y)
      .def_readwrite("vz", &Station::vz);

  py::class_<Spheroid>(m, "Spheroid")
      .def(py::init([](double a, double eps, double rho, double x0, double y0, double z0) {
             return Spheroid{a, eps, rho, x0, y0, z0};
           }),
           py::arg("a"), py::arg("eps"), py::arg("rho"), py::arg("x0"), py::arg("y0"), py::arg("z0"))
      .def_readwrite("a", &Spheroid::a)
      .def_readwrite("eps", &Spheroid::eps)
      .def_readwrite("rho", &Spheroid::rho)
      .def_readwrite("x0", &Spheroid::x0)
      .def_readwrite("y0", &Spheroid::y0)
      .def_readwrite("z0", &Spheroid::z0)
      .def_property_readonly("c", &Spheroid::c)
      .def_property_readonly("volume", [](const Spheroid& s) { return spheroid_volume(s); })
      .def_property_readonly("mass", [](const Spheroid& s) { return spheroid_mass(s); })
      .def("__repr__", &repr_spheroid);

  py::class_<DepthSegment>(m, "DepthSegment")
      .def(py::init<double, double>(), py::arg("z_min"), py::arg("z_max"))
      .def_readwrite("z_min", &DepthSegment::z_min)
      .def_readwrite("z_max", &DepthSegment::z_max);

  py::class_<BarCell>(m, "BarCell")
      .def(py::init<double, double, double, double, std::vector<DepthSegment>>(), py::arg("xc"),
           py::arg("yc"), py::arg("dx"), py::arg("dy"), py::arg("segments"))
      .def_readwrite("xc", &BarCell::xc)
      .def_readwrite("yc", &BarCell::yc)
      .def_readwrite("dx", &BarCell::dx)
      .def_readwrite("dy", &BarCell::dy)
      .def_readwrite("segments", &BarCell::segments);

  py::class_<BarBody>(m, "BarBody")
      .def(py::init<double, std::vector<BarCell>>(), py::arg("rho"), py::arg("cells"))
      .def_readwrite("rho", &BarBody::rho)
      .def_readwrite("cells", &BarBody::cells)
      .def_property_readonly("volume", [](const BarBody& b) { return bar_volume(b); });

  py::class_<BodyBounds>(m, "BodyBounds")
      .def(py::init([](std::pair<double, double> eps, std::pair<double, double> rho,
                       std::pair<double, double> x0, std::pair<double, double> y0,
                       std::pair<double, double> z0) {
             return BodyBounds{eps.first, eps.second, rho.first, rho.second, x0.first,
                               x0.second,  y0.first,  y0.second,  z0.first,  z0.second};
           }),
           py::arg("eps"), py::arg("rho"), py::arg("x0"), py::arg("y0"), py::arg("z0"))
      .def_readwrite("eps_min", &BodyBounds::eps_min)
      .def_readwrite("eps_max", &BodyBounds::eps_max)
      .def_readwrite("rho_min", &BodyBounds::rho_min)
      .def_readwrite("rho_max", &BodyBounds::rho_max)
      .def_readwrite("x0_min", &BodyBounds::x0_min)
      .def_readwrite("x0_max", &BodyBounds::x0_max)
      .def_readwrite("y0_min", &BodyBounds::y0_min)
      .def_readwrite("y0_max", &BodyBounds::y0_max)
      .def_readwrite("z0_min", &BodyBounds::z0_min)
      .def_readwrite("z0_max", &BodyBounds::z0_max);

  // Forward problem.
  m.def("spheroid_vz", &spheroid_vz, py::arg("spheroid"), py::arg("station"));
  m.def("body_vz", &body_vz, py::arg("body"), py::arg("station"));
  m.def(
      "field_at",
      [](const std::vector<Body>& model, const std::vector<Station>& stations) {
        return field_at(model, stations);
      },
      py::arg("model"), py::arg("stations"), "V_z at each station from spheroids and bar bodies");

  py::class_<FieldGrid>(m, "FieldGrid")
      .def_readonly("x_min", &FieldGrid::x_min)
      .def_readonly("x_max", &FieldGrid::x_max)
      .def_readonly("y_min", &FieldGrid::y_min)
      .def_readonly("y_max", &FieldGrid::y_max)
      .def_readonly("nx", &FieldGrid::nx)
      .def_readonly("ny", &FieldGrid::ny)
      .def_readonly("values", &FieldGrid::values)
      .def("x", &FieldGrid::x)
      .def("y", &FieldGrid::y)
      .def("at", py::overload_cast<std::size_t, std::size_t>(&FieldGrid::at, py::const_))
      .def("sample", &FieldGrid::sample);
  m.def(
      "field_grid",
      [](const std::vector<Body>& model, std::tuple<double, double, double, double> domain,
         std::size_t nx, std::size_t ny) {
        const auto [x0, x1, y0, y1] = domain;
        return field_grid(model, {x0, x1, y0, y1}, nx, ny);
      },
      py::arg("model"), py::arg("domain"), py::arg("nx"), py::arg("ny"));

  // Detection.
  py::class_<PeakCandidate>(m, "PeakCandidate")
      .def_readonly("x0", &PeakCandidate::x0)
      .def_readonly("y0", &PeakCandidate::y0)
      .def_readonly("vz_peak", &PeakCandidate::vz_peak)
      .def_readonly("accepted", &PeakCandidate::accepted)
      .def_readonly("valley_to_nearest", &PeakCandidate::valley_to_nearest)
      .def_readonly("on_boundary", &PeakCandidate::on_boundary);
  m.def(
      "rasterize_stations",
      [](const std::vector<Station>& stations, std::size_t nx, std::size_t ny,
         const std::string& method) {
        RasterOptions o;
        o.nx = nx;
        o.ny = ny;
        if (method == "idw") {
          o.method = Gridding::inverse_distance;
        } else if (method != "spline") {
          throw ValidationError("gridding method must be 'spline' or 'idw'");
        }
        return rasterize_stations(stations, o);
      },
      py::arg("stations"), py::arg("nx") = 61, py::arg("ny") = 61, py::arg("method") = "spline");
  m.def("find_peaks", &find_peaks, py::arg("grid"), py::arg("min_separation") = 2.0);
  m.def("valley_fraction", &valley_fraction, py::arg("a"), py::arg("b"), py::arg("grid"));
  m.def(
      "resolve_bodies",
      [](std::vector<PeakCandidate> peaks, const FieldGrid& grid, double noise_level,
         double valley_threshold, double noise_threshold) {
        auto accepted = resolve_bodies(peaks, grid, noise_level, {valley_threshold, noise_threshold});
        return py::make_tuple(accepted, peaks);
      },
      py::arg("peaks"), py::arg("grid"), py::arg("noise_level"), py::arg("valley_threshold") = 0.20,
      py::arg("noise_threshold") = 0.20, "Returns (accepted, peaks with decisions)");

  // Depth and mass.
  py::class_<DepthMassEstimate>(m, "DepthMassEstimate")
      .def_readonly("z0", &DepthMassEstimate::z0)
      .def_readonly("mass", &DepthMassEstimate::mass)
      .def_readonly("n_pairs", &DepthMassEstimate::n_pairs)
      .def_readonly("spread", &DepthMassEstimate::spread)
      .def_readonly("z0_min", &DepthMassEstimate::z0_min)
      .def_readonly("z0_max", &DepthMassEstimate::z0_max)
      .def_readonly("n_rejected", &DepthMassEstimate::n_rejected);
  m.def("mu_of_v", &mu_of_v, py::arg("v"));
  m.def("mu_general", &mu_general, py::arg("v"), py::arg("psi"));
  m.def("depth_from_pair", &depth_from_pair, py::arg("vz_p"), py::arg("vz_c"), py::arg("s"),
        py::arg("delta"));
  m.def("mass_from_point", &mass_from_point, py::arg("z0"), py::arg("delta"), py::arg("vz_c"));
  m.def(
      "estimate_bodies",
      [](const std::vector<PeakCandidate>& peaks, const std::vector<Station>& stations) {
        return estimate_bodies(peaks, stations);
      },
      py::arg("peaks"), py::arg("stations"));

  // Inversion.
  py::class_<ParameterBox>(m, "ParameterBox")
      .def_static(
          "from_bodies",
          [](const std::vector<BodyBounds>& bodies) { return ParameterBox::from_bodies(bodies); },
          py::arg("bodies"))
      .def_readonly("names", &ParameterBox::names)
      .def_readonly("p_min", &ParameterBox::p_min)
      .def_readonly("p_max", &ParameterBox::p_max)
      .def("midpoint", &ParameterBox::midpoint)
      .def("weights", &ParameterBox::weights)
      .def("__len__", &ParameterBox::size);

  py::enum_<Functional>(m, "Functional").value("F1", Functional::f1).value("F2", Functional::f2);

  py::class_<DecrementalOptions>(m, "DecrementalOptions")
      .def(py::init<>())
      .def_readwrite("functional", &DecrementalOptions::functional)
      .def_readwrite("alpha", &DecrementalOptions::alpha)
      .def_readwrite("rounds", &DecrementalOptions::rounds)
      .def_readwrite("shrink", &DecrementalOptions::shrink);

  py::class_<InversionResult>(m, "InversionResult")
      .def_readonly("params", &InversionResult::params)
      .def_readonly("masses", &InversionResult::masses)
      .def_readonly("bodies", &InversionResult::bodies)
      .def_readonly("volumes", &InversionResult::volumes)
      .def_readonly("f_initial", &InversionResult::f_initial)
      .def_readonly("f_final", &InversionResult::f_final)
      .def_readonly("misfit", &InversionResult::misfit)
      .def_readonly("rounds", &InversionResult::rounds)
      .def_readonly("alpha", &InversionResult::alpha);

  m.def(
      "coordinate_descent",
      [](const std::function<double(std::vector<double>)>& f, const ParameterBox& box,
         std::vector<double> start, double tol, std::size_t max_sweeps) {
        DescentOptions o;
        o.tol = tol;
        o.max_sweeps = max_sweeps;
        Objective obj = [&f](std::span<const double> p) {
          return f(std::vector<double>(p.begin(), p.end()));
        };
        return coordinate_descent(obj, box, std::move(start), o);
      },
      py::arg("objective"), py::arg("box"), py::arg("start"), py::arg("tol") = 1e-6,
      py::arg("max_sweeps") = 200);
  m.def(
      "decremental_solve",
      [](const std::vector<Station>& stations, const ParameterBox& box,
         const std::vector<double>& masses, const DecrementalOptions& options,
         const std::vector<double>& mass_depths) {
        return decremental_solve(stations, box, masses, options, {}, mass_depths);
      },
      py::arg("stations"), py::arg("box"), py::arg("masses"),
      py::arg("options") = DecrementalOptions{}, py::arg("mass_depths") = std::vector<double>{});
  m.def(
      "seed_masses",
      [](const std::vector<Station>& stations, const ParameterBox& box, double noise_level) {
        const auto s = seed_masses(stations, box, noise_level);
        return py::make_tuple(s.masses, s.depths);
      },
      py::arg("stations"), py::arg("box"), py::arg("noise_level"),
      "Returns (masses, depths) for the bodies of the box");

  py::class_<PipelineResult>(m, "PipelineResult")
      .def_readonly("grid", &PipelineResult::grid)
      .def_readonly("peaks", &PipelineResult::peaks)
      .def_readonly("accepted", &PipelineResult::accepted)
      .def_readonly("estimates", &PipelineResult::estimates)
      .def_readonly("initial_box", &PipelineResult::initial_box)
      .def_readonly("inversion", &PipelineResult::inversion)
      .def_readonly("diagnostics", &PipelineResult::diagnostics);
  m.def(
      "refine_pipeline",
      [](const std::vector<Station>& stations, double noise_level) {
        py::gil_scoped_release release;
        return refine_pipeline(stations, noise_level);
      },
      py::arg("stations"), py::arg("noise_level"));

  // Synthetic data.
  py::class_<ExactParams>(m, "ExactParams")
      .def_readonly("a", &ExactParams::a)
      .def_readonly("eps", &ExactParams::eps)
      .def_readonly("rho", &ExactParams::rho)
      .def_readonly("x0", &ExactParams::x0)
      .def_readonly("y0", &ExactParams::y0)
      .def_readonly("z0", &ExactParams::z0)
      .def_readonly("volume", &ExactParams::volume)
      .def_readonly("mass", &ExactParams::mass)
      .def("spheroid", &ExactParams::spheroid);
  py::class_<Scenario>(m, "Scenario")
      .def_readonly("name", &Scenario::name)
      .def_readonly("bodies", &Scenario::bodies)
      .def_readonly("stations", &Scenario::stations)
      .def_readonly("exact_params", &Scenario::exact_params)
      .def_readonly("reference_bounds", &Scenario::reference_bounds)
      .def_readonly("noise_sigma", &Scenario::noise_sigma)
      .def_readonly("noise_relative", &Scenario::noise_relative)
      .def_readonly("seed", &Scenario::seed);
  m.def("scenario_names", &scenario_names);
  m.def("scenario", &scenario, py::arg("name"));
  m.def("exact_field", &exact_field, py::arg("scenario"));
  m.def("noise_level", &noise_level, py::arg("scenario"));
  m.def(
      "simulate_survey",
      [](const Scenario& sc, std::optional<std::uint64_t> seed) {
        return simulate_survey(sc, seed.value_or(sc.seed));
      },
      py::arg("scenario"), py::arg("seed") = py::none());
  m.def("discretize_spheroid_to_bars", &discretize_spheroid_to_bars, py::arg("spheroid"),
        py::arg("step"));
  m.def(
      "add_noise",
      [](const std::vector<double>& values, double sigma, std::uint64_t seed) {
        return add_noise(values, sigma, seed);
      },
      py::arg("values"), py::arg("sigma"), py::arg("seed"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool; returns (exit code, stdout, stderr)");
}
