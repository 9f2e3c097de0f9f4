#include "gravinv/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "gravinv/errors.hpp"
#include "gravinv/io.hpp"

namespace gravinv {

namespace {

namespace fs = std::filesystem;

// Ordered key/value lines printed as the machine-readable summary.
class Summary {
public:
  explicit Summary(std::string command) { add("command", std::move(command)); }

  void add(const std::string& key, const std::string& value) { rows_.emplace_back(key, value); }
  void add(const std::string& key, double value) { add(key, format_number(value)); }
  void add(const std::string& key, std::size_t value) { add(key, std::to_string(value)); }

  void print(std::ostream& out) const {
    out << "[summary]\n";
    for (const auto& [k, v] : rows_) out << k << " = " << v << '\n';
  }

private:
  std::vector<std::pair<std::string, std::string>> rows_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

template <typename Writer>
void write_to(const std::string& path, Writer writer) {
  auto out = open_output(path);
  writer(out);
  out.flush();
  if (!out) throw ValidationError(path + ": write failed");
}

RasterOptions raster_options(const RunConfig& c) {
  RasterOptions r;
  r.nx = c.nx;
  r.ny = c.ny;
  r.method = c.gridding == "idw" ? Gridding::inverse_distance : Gridding::biharmonic_spline;
  r.smoothing = c.smoothing;
  r.power = c.power;
  return r;
}

DecrementalOptions inversion_options(const RunConfig& c) {
  DecrementalOptions o;
  o.functional = c.functional == "f2" ? Functional::f2 : Functional::f1;
  o.alpha = c.alpha;
  o.rounds = c.rounds;
  o.shrink = c.shrink;
  o.descent.tol = c.tol;
  o.descent.max_sweeps = c.sweeps;
  o.mass_update = c.mass_update == "fixed" ? MassUpdate::fixed : MassUpdate::peak_relation;
  return o;
}

PipelineOptions pipeline_options(const RunConfig& c) {
  PipelineOptions o;
  o.raster = raster_options(c);
  o.min_separation = c.min_separation;
  o.resolve.valley_threshold = c.valley;
  o.resolve.noise_threshold = c.noise_threshold;
  o.resolve_merged = c.resolve_merged;
  o.inversion = inversion_options(c);
  return o;
}

std::vector<Station> read_survey(const RunConfig& c) {
  auto stations = read_file(c.survey, [](std::istream& in, const std::string& src) {
    return read_stations(in, src);
  });
  const auto measured = std::count_if(stations.begin(), stations.end(),
                                      [](const Station& s) { return s.vz.has_value(); });
  require(measured >= 3, c.survey + ": needs at least 3 stations with measured vz");
  return stations;
}

void print_bodies(std::ostream& out, const InversionResult& r) {
  out << "body        a      eps      rho       x0       y0       z0   volume     mass\n";
  out << std::fixed << std::setprecision(3);
  for (std::size_t k = 0; k < r.bodies.size(); ++k) {
    const auto& s = r.bodies[k];
    out << std::setw(4) << k + 1;
    for (double v : {s.a, s.eps, s.rho, s.x0, s.y0, s.z0, r.volumes[k], r.masses[k]}) {
      out << std::setw(9) << v;
    }
    out << '\n';
  }
  out << std::defaultfloat << std::setprecision(6);
  out << "F initial " << r.f_initial << ", final " << r.f_final << ", misfit " << r.misfit
      << " mGal^2 after " << r.rounds << " rounds\n";
}

void print_peaks(std::ostream& out, std::span<const PeakCandidate> peaks) {
  out << std::fixed << std::setprecision(3);
  for (const auto& p : peaks) {
    out << (p.accepted ? "accepted" : "merged  ") << " pole (" << p.x0 << ", " << p.y0
        << ") vz " << p.vz_peak;
    if (p.valley_to_nearest) out << " valley " << *p.valley_to_nearest;
    if (p.on_boundary) out << " [boundary]";
    out << '\n';
  }
  out << std::defaultfloat << std::setprecision(6);
}

void cmd_forward(const RunConfig& c, Summary& s, std::ostream& report) {
  const auto model = read_file(c.model, [](std::istream& in, const std::string& src) {
    return read_model(in, src);
  });
  auto stations = read_file(c.stations, [](std::istream& in, const std::string& src) {
    return read_stations(in, src);
  });
  require(!model.empty(), c.model + ": no bodies");
  const auto field = field_at(model, stations);
  for (std::size_t i = 0; i < stations.size(); ++i) stations[i].vz = field[i];
  write_to(c.out, [&](std::ostream& o) { write_stations(o, stations); });

  s.add("bodies", model.size());
  s.add("stations", stations.size());
  if (!field.empty()) {
    const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
    s.add("vz_min", *lo);
    s.add("vz_max", *hi);
  }
  s.add("out", c.out);
  if (c.report) report << "computed vz at " << stations.size() << " stations from " << model.size() << " bodies\n";
}

void cmd_grid(const RunConfig& c, Summary& s, std::ostream& report) {
  FieldGrid grid;
  if (!c.model.empty()) {
    const auto model = read_file(c.model, [](std::istream& in, const std::string& src) {
      return read_model(in, src);
    });
    grid = field_grid(model, {c.domain[0], c.domain[1], c.domain[2], c.domain[3]}, c.nx, c.ny);
    s.add("source", "model");
  } else {
    grid = rasterize_stations(read_survey(c), raster_options(c));
    s.add("source", "survey");
    s.add("gridding", c.gridding);
  }
  write_to(c.out, [&](std::ostream& o) { write_grid(o, grid); });
  const auto [lo, hi] = std::minmax_element(grid.values.begin(), grid.values.end());
  s.add("nx", grid.nx);
  s.add("ny", grid.ny);
  s.add("vz_min", *lo);
  s.add("vz_max", *hi);
  s.add("out", c.out);
  if (c.report) report << "grid " << grid.nx << " x " << grid.ny << ", vz in [" << *lo << ", " << *hi << "]\n";
}

void cmd_noise(const RunConfig& c, Summary& s, std::ostream& report) {
  auto stations = read_survey(c);
  std::vector<double> values;
  for (const auto& st : stations) values.push_back(st.vz.value_or(0.0));
  const std::uint64_t seed = c.seed.value_or(kDefaultSeed);
  const auto noisy = c.relative > 0.0 ? add_relative_noise(values, c.relative, seed)
                                      : add_noise(values, c.sigma, seed);
  for (std::size_t i = 0; i < stations.size(); ++i) {
    if (stations[i].vz) stations[i].vz = noisy[i];
  }
  write_to(c.out, [&](std::ostream& o) { write_stations(o, stations); });
  s.add("stations", stations.size());
  s.add("sigma", c.sigma);
  s.add("relative", c.relative);
  s.add("seed", std::to_string(seed));
  s.add("out", c.out);
  if (c.report) report << "added noise to " << stations.size() << " stations with seed " << seed << '\n';
}

struct Detection {
  FieldGrid grid;
  std::vector<PeakCandidate> peaks;
  std::vector<PeakCandidate> accepted;
};

Detection detect(const RunConfig& c, std::span<const Station> stations) {
  const auto opts = pipeline_options(c);
  Detection d;
  d.grid = rasterize_stations(stations, opts.raster);
  d.peaks = find_peaks(d.grid, opts.min_separation);
  d.accepted = resolve_bodies(d.peaks, d.grid, c.noise_level, opts.resolve);
  return d;
}

void cmd_peaks(const RunConfig& c, Summary& s, std::ostream& report) {
  const auto stations = read_survey(c);
  const auto d = detect(c, stations);
  write_to(c.out, [&](std::ostream& o) { write_peaks(o, d.peaks); });
  if (!c.grid_out.empty()) write_to(c.grid_out, [&](std::ostream& o) { write_grid(o, d.grid); });
  s.add("poles", d.peaks.size());
  s.add("accepted", d.accepted.size());
  s.add("out", c.out);
  if (c.report) print_peaks(report, d.peaks);
}

void cmd_estimate(const RunConfig& c, Summary& s, std::ostream& report) {
  const auto stations = read_survey(c);
  const auto d = detect(c, stations);
  const auto estimates = estimate_bodies(d.accepted, stations, pipeline_options(c).estimate);
  write_to(c.out, [&](std::ostream& o) { write_estimates(o, d.accepted, estimates); });
  s.add("accepted", d.accepted.size());
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto key = "body" + std::to_string(k + 1);
    s.add(key + ".z0", estimates[k].z0);
    s.add(key + ".mass", estimates[k].mass);
  }
  s.add("out", c.out);
  if (c.report) {
    report << std::fixed << std::setprecision(3);
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      report << "body " << k + 1 << " at (" << d.accepted[k].x0 << ", " << d.accepted[k].y0
             << "): z0 " << estimates[k].z0 << " km, M " << estimates[k].mass << " from "
             << estimates[k].n_pairs << " pairs\n";
    }
    report << std::defaultfloat << std::setprecision(6);
  }
}

void summarize_inversion(const InversionResult& r, Summary& s) {
  s.add("functional", r.functional == Functional::f1 ? "F1" : "F2");
  s.add("alpha", r.alpha);
  s.add("bodies", r.bodies.size());
  s.add("rounds", r.rounds);
  s.add("f_initial", r.f_initial);
  s.add("f_final", r.f_final);
  s.add("misfit", r.misfit);
  for (std::size_t k = 0; k < r.bodies.size(); ++k) {
    const auto key = "body" + std::to_string(k + 1);
    const auto& b = r.bodies[k];
    s.add(key + ".eps", b.eps);
    s.add(key + ".rho", b.rho);
    s.add(key + ".x0", b.x0);
    s.add(key + ".y0", b.y0);
    s.add(key + ".z0", b.z0);
    s.add(key + ".mass", r.masses[k]);
  }
}

void cmd_invert(const RunConfig& c, Summary& s, std::ostream& report) {
  const auto stations = read_survey(c);
  const auto constraints = read_file(c.constraints, [](std::istream& in, const std::string& src) {
    return read_constraints(in, src);
  });
  const auto opts = pipeline_options(c);
  InversionResult r;
  if (constraints.masses.empty()) {
    const auto seeded = seed_masses(stations, constraints.box, c.noise_level, opts);
    r = decremental_solve(stations, constraints.box, seeded.masses, opts.inversion, {}, seeded.depths);
    s.add("masses", "estimated");
  } else {
    r = decremental_solve(stations, constraints.box, constraints.masses, opts.inversion);
    s.add("masses", "given");
  }
  write_to(c.out, [&](std::ostream& o) { write_inversion(o, r); });
  if (!c.model_out.empty()) write_to(c.model_out, [&](std::ostream& o) { write_spheroids(o, r.bodies); });
  summarize_inversion(r, s);
  s.add("out", c.out);
  if (c.report) print_bodies(report, r);
}

void cmd_pipeline(const RunConfig& c, Summary& s, std::ostream& report) {
  const auto stations = read_survey(c);
  const auto r = refine_pipeline(stations, c.noise_level, pipeline_options(c));
  write_to(c.out, [&](std::ostream& o) { write_pipeline(o, r); });
  if (!c.grid_out.empty()) write_to(c.grid_out, [&](std::ostream& o) { write_grid(o, r.grid); });
  if (!c.model_out.empty()) {
    write_to(c.model_out, [&](std::ostream& o) { write_spheroids(o, r.inversion.bodies); });
  }
  s.add("poles", r.peaks.size());
  s.add("accepted", r.accepted.size());
  summarize_inversion(r.inversion, s);
  s.add("out", c.out);
  if (c.report) {
    print_peaks(report, r.peaks);
    for (const auto& d : r.diagnostics) report << d << '\n';
    if (!r.inversion.bodies.empty()) print_bodies(report, r.inversion);
  }
}

void cmd_scenario(const RunConfig& c, Summary& s, std::ostream& report) {
  const Scenario sc = scenario(c.name);
  const std::uint64_t seed = c.seed.value_or(sc.seed);
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);

  const auto survey = simulate_survey(sc, seed);
  write_to((dir / "model.txt").string(), [&](std::ostream& o) { write_bar_bodies(o, sc.bodies); });
  write_to((dir / "stations.txt").string(), [&](std::ostream& o) { write_stations(o, sc.stations); });
  write_to((dir / "survey.txt").string(), [&](std::ostream& o) { write_stations(o, survey); });
  write_to((dir / "exact.txt").string(), [&](std::ostream& o) { write_exact(o, sc.exact_params); });
  if (!sc.reference_bounds.empty()) {
    const auto box = ParameterBox::from_bodies(sc.reference_bounds);
    write_to((dir / "constraints.txt").string(), [&](std::ostream& o) { write_constraints(o, box); });
  }

  s.add("name", sc.name);
  s.add("seed", std::to_string(seed));
  s.add("bodies", sc.bodies.size());
  s.add("stations", sc.stations.size());
  s.add("noise_sigma", sc.noise_sigma);
  s.add("noise_relative", sc.noise_relative);
  s.add("noise_level", noise_level(sc));
  s.add("out_dir", dir.string());
  if (c.report) {
    report << sc.name << ": " << sc.bodies.size() << " bodies, " << sc.stations.size()
           << " stations, seed " << seed << '\n';
  }
}

void add_raster_flags(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--nx", c.nx, "Raster columns")->capture_default_str();
  cmd->add_option("--ny", c.ny, "Raster rows")->capture_default_str();
  cmd->add_option("--gridding", c.gridding, "Survey interpolation")
      ->check(CLI::IsMember({"spline", "idw"}))
      ->capture_default_str();
  cmd->add_option("--smoothing", c.smoothing, "Spline regularization")->capture_default_str();
  cmd->add_option("--power", c.power, "Inverse-distance exponent")->capture_default_str();
}

void add_detection_flags(CLI::App* cmd, RunConfig& c) {
  add_raster_flags(cmd, c);
  cmd->add_option("--noise-level", c.noise_level,
                  "Survey noise as a fraction of the strongest pole")
      ->capture_default_str();
  cmd->add_option("--valley", c.valley, "Valley fraction that separates two poles")
      ->capture_default_str();
  cmd->add_option("--noise-threshold", c.noise_threshold, "Largest noise fraction per pole")
      ->capture_default_str();
  cmd->add_option("--min-separation", c.min_separation, "Distance between distinct maxima, km")
      ->capture_default_str();
}

void add_inversion_flags(CLI::App* cmd, RunConfig& c) {
  cmd->add_option("--alpha", c.alpha, "Regularization parameter")->capture_default_str();
  cmd->add_option("--functional", c.functional, "Stabilizer: f1 (about the box midpoint) or f2")
      ->check(CLI::IsMember({"f1", "f2"}))
      ->capture_default_str();
  cmd->add_option("--mass-update", c.mass_update, "Mass handling between rounds")
      ->check(CLI::IsMember({"peak", "fixed"}))
      ->capture_default_str();
  cmd->add_option("--tol", c.tol, "Relative decrease that ends a descent")->capture_default_str();
  cmd->add_option("--sweeps", c.sweeps, "Sweeps per descent")->capture_default_str();
  cmd->add_option("--rounds", c.rounds, "Decremental rounds")->capture_default_str();
  cmd->add_option("--shrink", c.shrink, "Box half-width factor per round")->capture_default_str();
}

int fail(std::ostream& err, int code, const std::string& what) {
  err << "gravinv: " << what << '\n';
  return code;
}

}  // namespace

void RunConfig::validate() const {
  require(nx >= 2 && ny >= 2, "--nx and --ny must be at least 2");
  require(domain.size() == 4 && domain[0] < domain[1] && domain[2] < domain[3],
          "--domain needs xmin < xmax and ymin < ymax");
  require(smoothing >= 0.0, "--smoothing must be non-negative");
  require(power > 0.0, "--power must be positive");
  require(min_separation > 0.0, "--min-separation must be positive");
  require(valley >= 0.0 && valley <= 1.0, "--valley must lie in [0, 1]");
  require(noise_threshold >= 0.0, "--noise-threshold must be non-negative");
  require(noise_level >= 0.0, "--noise-level must be non-negative");
  require(alpha >= 0.0 && std::isfinite(alpha), "--alpha must be finite and non-negative");
  require(tol >= 0.0, "--tol must be non-negative");
  require(sweeps >= 1, "--sweeps must be at least 1");
  require(rounds >= 1, "--rounds must be at least 1");
  require(shrink > 0.0 && shrink < 1.0, "--shrink must lie in (0, 1)");
  require(sigma >= 0.0, "--sigma must be non-negative");
  require(relative >= 0.0, "--relative must be non-negative");
  require(!(sigma > 0.0 && relative > 0.0), "give either --sigma or --relative, not both");
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  CLI::App app{"Gravity inversion for ore bodies approximated by spheroids", "gravinv"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  auto* forward = app.add_subcommand("forward", "V_z of a model at stations");
  forward->add_option("--model", c.model, "Spheroid or bar-body model file")->required();
  forward->add_option("--stations", c.stations, "Stations file")->required();
  forward->add_option("--out", c.out, "Output stations file with V_z")->required();

  auto* grid = app.add_subcommand("grid", "Raster of V_z from a model or a survey");
  auto* grid_model = grid->add_option("--model", c.model, "Model file");
  auto* grid_survey = grid->add_option("--survey", c.survey, "Survey file");
  grid_model->excludes(grid_survey);
  grid->add_option("--domain", c.domain, "xmin xmax ymin ymax for --model")
      ->expected(4)
      ->capture_default_str();
  add_raster_flags(grid, c);
  grid->add_option("--out", c.out, "Output grid file")->required();

  auto* noise = app.add_subcommand("noise", "Adds seeded Gaussian noise to a survey");
  noise->add_option("--survey,--stations", c.survey, "Stations file with V_z")->required();
  noise->add_option("--sigma", c.sigma, "Absolute deviation, mGal");
  noise->add_option("--relative", c.relative, "Deviation as a fraction of |V_z|");
  noise->add_option("--seed", c.seed, "Random seed (default 20140901)");
  noise->add_option("--out", c.out, "Output stations file")->required();

  auto* peaks = app.add_subcommand("peaks", "Poles of the gridded survey");
  peaks->add_option("--survey", c.survey, "Survey file")->required();
  add_detection_flags(peaks, c);
  peaks->add_option("--out", c.out, "Output peaks file")->required();
  peaks->add_option("--grid-out", c.grid_out, "Also write the raster");

  auto* estimate = app.add_subcommand("estimate", "Depth and mass of every accepted pole");
  estimate->add_option("--survey", c.survey, "Survey file")->required();
  add_detection_flags(estimate, c);
  estimate->add_option("--out", c.out, "Output estimates file")->required();

  auto* invert = app.add_subcommand("invert", "Decremental inversion inside a constraint box");
  invert->add_option("--survey", c.survey, "Survey file")->required();
  invert->add_option("--constraints", c.constraints, "Constraints file")->required();
  add_detection_flags(invert, c);
  add_inversion_flags(invert, c);
  invert->add_option("--out", c.out, "Output report")->required();
  invert->add_option("--model-out", c.model_out, "Also write the fitted spheroids");

  auto* pipeline = app.add_subcommand("pipeline", "Detection, estimation and inversion");
  pipeline->add_option("--survey", c.survey, "Survey file")->required();
  add_detection_flags(pipeline, c);
  add_inversion_flags(pipeline, c);
  pipeline->add_flag("!--keep-merged", c.resolve_merged, "Never split poles merged by the valley rule");
  pipeline->add_option("--out", c.out, "Output report")->required();
  pipeline->add_option("--grid-out", c.grid_out, "Also write the raster");
  pipeline->add_option("--model-out", c.model_out, "Also write the fitted spheroids");

  auto* scen = app.add_subcommand("scenario", "Writes a synthetic test case");
  scen->add_option("--name", c.name, "example1 or example2")->required();
  scen->add_option("--out-dir", c.out_dir, "Output directory")->required();
  scen->add_option("--seed", c.seed, "Noise seed (default: the scenario's own)");

  for (auto* cmd : {forward, grid, noise, peaks, estimate, invert, pipeline, scen}) {
    cmd->add_flag("--report", c.report, "Print a readable report after the summary");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  c.subcommand = app.get_subcommands().front()->get_name();
  try {
    if (c.subcommand == "grid") require(!c.model.empty() || !c.survey.empty(), "grid needs --model or --survey");
    c.validate();
    pipeline_options(c).validate();

    Summary summary(c.subcommand);
    std::ostringstream report;
    if (c.subcommand == "forward") cmd_forward(c, summary, report);
    else if (c.subcommand == "grid") cmd_grid(c, summary, report);
    else if (c.subcommand == "noise") cmd_noise(c, summary, report);
    else if (c.subcommand == "peaks") cmd_peaks(c, summary, report);
    else if (c.subcommand == "estimate") cmd_estimate(c, summary, report);
    else if (c.subcommand == "invert") cmd_invert(c, summary, report);
    else if (c.subcommand == "pipeline") cmd_pipeline(c, summary, report);
    else cmd_scenario(c, summary, report);

    summary.print(out);
    out << report.str();
    return kExitOk;
  } catch (const ParseError& e) {
    return fail(err, kExitParse, e.what());
  } catch (const ValidationError& e) {
    return fail(err, kExitValidation, e.what());
  } catch (const Error& e) {
    return fail(err, kExitNumerical, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, kExitValidation, e.what());
  }
}

}  // namespace gravinv
