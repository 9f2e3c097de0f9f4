// Acceptance suite: one PASS/FAIL line per criterion.
//
//   gravinv_acceptance [--only N ...] [--known-gap N ...] [--work-dir DIR]
//
// Exits 0 when every failing criterion is listed with --known-gap.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gravinv/bulakh.hpp"
#include "gravinv/cli.hpp"
#include "gravinv/forward.hpp"
#include "gravinv/invert.hpp"
#include "gravinv/synth.hpp"
#include "support.hpp"

using namespace gravinv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
  void info(const std::string& what) { notes.push_back(what); }
};

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// Index of the exact row nearest to (x, y).
std::size_t nearest_row(std::span<const ExactParams> rows, double x, double y) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (std::hypot(rows[k].x0 - x, rows[k].y0 - y) < std::hypot(rows[best].x0 - x, rows[best].y0 - y)) best = k;
  }
  return best;
}

// Matches fitted bodies to exact rows one to one by nearest position.
// Returns an empty vector when two bodies claim the same row.
std::vector<std::size_t> match_rows(std::span<const Spheroid> bodies, std::span<const ExactParams> rows) {
  std::vector<std::size_t> out;
  std::set<std::size_t> used;
  for (const auto& b : bodies) {
    const std::size_t k = nearest_row(rows, b.x0, b.y0);
    if (!used.insert(k).second) return {};
    out.push_back(k);
  }
  return out;
}

Outcome mu_table() {
  Outcome o;
  const double table[] = {0.5240, 0.7209, 0.9011, 1.0898, 1.3048, 1.5700, 1.9301, 2.4969, 3.7071};
  double worst = 0.0;
  for (int k = 1; k <= 9; ++k) worst = std::max(worst, std::abs(mu_of_v(0.1 * k) - table[k - 1]));
  o.check(worst <= 1e-4, "mu(v) table");
  o.info(fmt("max |mu - table| = %.2e", worst));
  return o;
}

Outcome mu_generalization() {
  Outcome o;
  testing::Rng rng(20140901);
  double collapse = 0.0;
  double residual = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(1e-6, 1.0 - 1e-6);
    collapse = std::max(collapse, std::abs(mu_general(v, 0.0) - mu_of_v(v)));
  }
  for (int i = 0; i < 1000; ++i) {
    const double mu = rng.uniform(0.05, 5.0);
    const double psi = rng.uniform(0.0, 0.95);
    // v for a buried sphere at depth mu with probe offset psi.
    const double v = std::pow((mu * mu + psi * psi) / (mu * mu + 1.0), 1.5);
    const double back = mu_general(v, psi);
    const double w = std::pow((back * back + psi * psi) / (back * back + 1.0), 1.5);
    residual = std::max(residual, std::abs(w - v));
  }
  o.check(collapse <= 1e-12, "mu_general(v, 0) = mu_of_v(v)");
  o.check(residual < 1e-10, "round-trip residual");
  o.info(fmt("collapse %.2e, residual %.2e", collapse, residual));
  return o;
}

Outcome unit_constant() {
  Outcome o;
  const double rel = std::abs(PhysicalConstants::inverse_gamma - 0.15) / 0.15;
  o.check(rel <= 0.002, "1/gamma vs 0.15");
  o.info(fmt("1/gamma = %.5f, off by %.3f%%", PhysicalConstants::inverse_gamma, 100 * rel));
  return o;
}

Outcome forward_oracle() {
  Outcome o;
  testing::Rng rng(4);
  double worst_far = 0.0;
  double worst_near = 0.0;
  std::size_t n_far = 0;
  std::size_t n_near = 0;
  for (int i = 0; i < 20; ++i) {
    Spheroid s;
    s.a = rng.uniform(0.5, 2.0);
    s.eps = rng.uniform(0.3, 2.2);
    s.rho = rng.uniform(0.5, 3.5);
    s.x0 = rng.uniform(-2, 2);
    s.y0 = rng.uniform(-2, 2);
    s.z0 = s.c() * rng.uniform(1.1, 2.0) + 0.2;
    const BarBody bars = discretize_spheroid_to_bars(s, s.a / 40.0);
    const double near_r = 1.2 * std::max(s.a, s.c());
    for (int k = 0; k < 40; ++k) {
      const double h = rng.uniform(0.0, 6.0 * s.a);
      const double phi = rng.uniform(0, 2 * kPi);
      const Station p{s.x0 + h * std::cos(phi), s.y0 + h * std::sin(phi), {}};
      const double r = std::hypot(h, s.z0);  // distance to the centre
      const double err = testing::rel_diff(body_vz(bars, p), spheroid_vz(s, p));
      if (r >= 2.0 * s.a) {
        worst_far = std::max(worst_far, err);
        ++n_far;
      } else if (r >= near_r) {
        worst_near = std::max(worst_near, err);
        ++n_near;
      }
    }
  }
  o.check(worst_far < 0.01, "bars within 1% at r >= 2a");
  o.check(worst_near < 0.03, "bars within 3% at r >= 1.2 max(a, c)");
  o.info(fmt("r >= 2a: %zu stations, max %.2e; closer: %zu stations, max %.2e", n_far, worst_far, n_near,
             worst_near));
  return o;
}

Outcome sphere_limit() {
  Outcome o;
  testing::Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    Spheroid sphere{rng.uniform(0.5, 2.0), 1.0, rng.uniform(0.5, 3.5), rng.uniform(-2, 2), rng.uniform(-2, 2), 0};
    sphere.z0 = sphere.a * rng.uniform(1.1, 3.0);
    const double h = rng.uniform(0.0, 5.0 * sphere.a);
    const double phi = rng.uniform(0, 2 * kPi);
    const Station p{sphere.x0 + h * std::cos(phi), sphere.y0 + h * std::sin(phi), {}};
    // Point-mass field of the sphere, independent of the spheroid code.
    const double r = std::hypot(h, sphere.z0);
    const double ref = kGamma * spheroid_mass(sphere) * sphere.z0 / (r * r * r);
    for (const double eps : {1.0 - 1e-6, 1.0 + 1e-6}) {
      Spheroid s = sphere;
      s.eps = eps;
      worst = std::max(worst, testing::rel_diff(spheroid_vz(s, p), ref));
    }
  }
  o.check(worst < 1e-4, "oblate and prolate branches at eps = 1 -/+ 1e-6");
  o.info(fmt("max relative difference %.2e", worst));
  return o;
}

Outcome example1_detection() {
  Outcome o;
  const Scenario sc = scenario("example1");
  const auto survey = simulate_survey(sc);
  const auto r = refine_pipeline(survey, noise_level(sc));
  o.check(r.accepted.size() == 2, fmt("2 bodies accepted (got %zu)", r.accepted.size()));
  if (r.accepted.size() != 2) return o;
  const auto& weaker = r.accepted[1];
  if (!weaker.valley_to_nearest) {
    o.check(false, "valley fraction recorded");
  } else {
    const double v = *weaker.valley_to_nearest;
    o.check(v >= 0.25 && v <= 0.45, "valley fraction in [0.25, 0.45]");
    o.info(fmt("valley %.3f", v));
  }
  // Detection-stage Bulakh estimates, before any reseeding.
  const auto est = estimate_bodies(r.accepted, survey);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::size_t row = nearest_row(sc.exact_params, r.accepted[k].x0, r.accepted[k].y0);
    const double z_lo = row == 0 ? 3.0 : 2.9, z_hi = row == 0 ? 5.5 : 3.7;
    const double m_lo = row == 0 ? 30.0 : 37.0, m_hi = row == 0 ? 105.0 : 60.0;
    const auto name = "body " + std::to_string(row + 1);
    o.check(est[k].z0 >= z_lo && est[k].z0 <= z_hi, name + fmt(" z0 in [%.1f, %.1f]", z_lo, z_hi));
    o.check(est[k].mass >= m_lo && est[k].mass <= m_hi, name + fmt(" M in [%.0f, %.0f]", m_lo, m_hi));
    o.info(name + fmt(": z0 %.2f, M %.1f from %zu pairs", est[k].z0, est[k].mass, est[k].n_pairs));
  }
  return o;
}

InversionResult example1_inversion(double alpha) {
  const Scenario sc = scenario("example1");
  const auto survey = simulate_survey(sc);
  const auto box = ParameterBox::from_bodies(sc.reference_bounds);
  const auto seed = seed_masses(survey, box, noise_level(sc));
  DecrementalOptions options;
  options.alpha = alpha;
  return decremental_solve(survey, box, seed.masses, options, {}, seed.depths);
}

Outcome example1_table2() {
  Outcome o;
  const Scenario sc = scenario("example1");
  const auto box = ParameterBox::from_bodies(sc.reference_bounds);
  const auto r = example1_inversion(1e-8);
  o.check(box.contains(r.params), "all ten parameters inside the corridors");
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& b = r.bodies[k];
    const auto& e = sc.exact_params[k];
    const auto name = "body " + std::to_string(k + 1);
    const double dz = std::abs(b.z0 - e.z0) / e.z0;
    const double dm = std::abs(r.masses[k] - e.mass) / e.mass;
    o.check(dz <= 0.10, name + " z0 within 10%");
    o.check(dm <= 0.15, name + " M within 15%");
    o.check(std::abs(b.x0 - e.x0) <= 1.0 && std::abs(b.y0 - e.y0) <= 1.0, name + " x0, y0 within 1 km");
    o.check(std::abs(b.eps - e.eps) <= 0.25, name + " eps within 0.25");
    o.info(name + fmt(": eps %.3f (%.2f) x0 %.2f (%.2f) y0 %.2f (%.2f) z0 %.2f (%.2f) M %.1f (%.1f)", b.eps, e.eps,
                      b.x0, e.x0, b.y0, e.y0, b.z0, e.z0, r.masses[k], e.mass));
  }
  o.check(r.f_final <= 0.2 * r.f_initial, "F1 final <= 0.2 F1 initial");
  o.info(fmt("F1 %.4g -> %.4g in %zu rounds", r.f_initial, r.f_final, r.rounds));
  return o;
}

Outcome example2_pipeline() {
  Outcome o;
  const Scenario sc = scenario("example2");
  const auto survey = simulate_survey(sc);
  const auto r = refine_pipeline(survey, noise_level(sc));
  o.check(r.accepted.size() == 5, fmt("5 bodies detected (got %zu)", r.accepted.size()));
  for (const auto& p : r.accepted) {
    const std::size_t row = nearest_row(sc.exact_params, p.x0, p.y0);
    o.info(fmt("pole (%.2f, %.2f): %.2f km from body %zu", p.x0, p.y0,
               std::hypot(p.x0 - sc.exact_params[row].x0, p.y0 - sc.exact_params[row].y0), row + 1));
  }
  const auto& inv = r.inversion;
  const auto rows = match_rows(inv.bodies, sc.exact_params);
  o.check(rows.size() == sc.exact_params.size() && inv.bodies.size() == sc.exact_params.size(),
          "one fitted body per exact row");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& b = inv.bodies[k];
    const auto& e = sc.exact_params[rows[k]];
    const auto name = "body " + std::to_string(rows[k] + 1);
    const double d = std::hypot(b.x0 - e.x0, b.y0 - e.y0);
    const double dz = std::abs(b.z0 - e.z0) / e.z0;
    const double dm = std::abs(inv.masses[k] - e.mass) / e.mass;
    o.check(d <= 0.7, name + " (x0, y0) within 0.7 km");
    o.check(dz <= 0.10, name + " z0 within 10%");
    o.check(dm <= 0.15, name + " M within 15%");
    o.info(name + fmt(": dxy %.2f km, z0 %.2f (%.2f, %+.0f%%), M %.1f (%.1f, %+.0f%%)", d, b.z0, e.z0,
                      100 * (b.z0 - e.z0) / e.z0, inv.masses[k], e.mass, 100 * (inv.masses[k] - e.mass) / e.mass));
  }
  return o;
}

Outcome alpha_insensitivity() {
  Outcome o;
  const auto r0 = example1_inversion(0.0);
  const auto r8 = example1_inversion(1e-8);
  double worst = 0.0;
  for (std::size_t j = 0; j < r0.params.size(); ++j) {
    worst = std::max(worst, testing::rel_diff(r0.params[j], r8.params[j]));
  }
  o.check(worst < 1e-3, "alpha 0 and 1e-8 agree within 1e-3");
  o.info(fmt("max relative difference %.2e", worst));
  return o;
}

Outcome solver_properties() {
  Outcome o;
  testing::Rng rng(10);
  double worst = 0.0;
  bool monotone = true;
  bool feasible = true;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform(0, 10));
    ParameterBox box;
    std::vector<double> centre(n), weight(n), start(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double lo = rng.uniform(-5, 5);
      box.names.push_back("p" + std::to_string(j));
      box.p_min.push_back(lo);
      box.p_max.push_back(lo + rng.uniform(0.1, 6));
      centre[j] = rng.uniform(-8, 8);
      weight[j] = rng.uniform(0.1, 10);
      start[j] = rng.uniform(box.p_min[j], box.p_max[j]);
    }
    const Objective f = [&](std::span<const double> p) {
      if (!box.contains(p)) feasible = false;
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) sum += weight[j] * (p[j] - centre[j]) * (p[j] - centre[j]);
      return sum;
    };
    DescentTrace trace;
    const auto p = coordinate_descent(f, box, start, {1e-15, 50, 60}, &trace);
    for (std::size_t j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(p[j] - std::clamp(centre[j], box.p_min[j], box.p_max[j])));
    }
    for (std::size_t i = 1; i < trace.values.size(); ++i) monotone = monotone && trace.values[i] <= trace.values[i - 1];
    feasible = feasible && trace.feasible;
  }
  o.check(worst <= 1e-6, "box-projected optimum within 1e-6");
  o.check(monotone, "objective non-increasing per sweep");
  o.check(feasible, "every iterate inside its box");
  o.info(fmt("max distance to optimum %.2e", worst));
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const fs::path& work) {
  Outcome o;
  fs::remove_all(work);
  const std::vector<std::string> outputs{"report.txt", "grid.txt", "model.txt"};
  for (const std::string run_name : {"a", "b"}) {
    const fs::path dir = work / run_name;
    std::ostringstream out, err;
    int code = run({"scenario", "--name", "example1", "--seed", "20140901", "--out-dir", (dir / "data").string()},
                   out, err);
    o.check(code == kExitOk, "scenario run " + run_name + ": " + err.str());
    code = run({"pipeline", "--survey", (dir / "data" / "survey.txt").string(), "--noise-level", "0.0321", "--out",
                (dir / "report.txt").string(), "--grid-out", (dir / "grid.txt").string(), "--model-out",
                (dir / "model.txt").string()},
               out, err);
    o.check(code == kExitOk, "pipeline run " + run_name + ": " + err.str());
  }
  std::size_t bytes = 0;
  for (const auto& f : outputs) {
    const auto a = slurp(work / "a" / f);
    o.check(!a.empty() && a == slurp(work / "b" / f), f + " identical");
    bytes += a.size();
  }
  o.info(fmt("%zu files, %zu bytes compared", outputs.size(), bytes));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gravinv acceptance suite"};
  std::vector<int> only;
  std::vector<int> known_gaps;
  std::string work_dir = (fs::temp_directory_path() / "gravinv_acceptance").string();
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--known-gap", known_gaps, "Criteria whose failure does not fail the run");
  app.add_option("--work-dir", work_dir, "Scratch directory for the determinism check");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"mu(v) table", mu_table},
      {"generalization collapse", mu_generalization},
      {"unit constant", unit_constant},
      {"forward oracle equivalence", forward_oracle},
      {"sphere-limit continuity", sphere_limit},
      {"Example-1 detection and seeding", example1_detection},
      {"Example-1 inversion", example1_table2},
      {"Example-2 end-to-end", example2_pipeline},
      {"alpha-insensitivity", alpha_insensitivity},
      {"solver properties", solver_properties},
      {"determinism", [&] { return determinism(work_dir); }},
  };

  int failed = 0;
  int failed_known = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool gap = std::find(known_gaps.begin(), known_gaps.end(), id) != known_gaps.end();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first
              << fmt(" (%.2f s)", secs) << (!o.pass && gap ? " [known gap]" : "") << '\n';
    for (const auto& n : o.notes) std::cout << "        " << n << '\n';
    if (!o.pass) (gap ? failed_known : failed)++;
  }
  std::cout << (failed == 0 ? "acceptance: ok" : "acceptance: FAILED") << " (" << failed << " failed, "
            << failed_known << " known gaps)\n";
  return failed == 0 ? 0 : 1;
}
