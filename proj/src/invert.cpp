#include "gravinv/invert.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "gravinv/errors.hpp"
#include "gravinv/forward.hpp"

namespace gravinv {

namespace {

constexpr std::size_t kEps = static_cast<std::size_t>(Param::eps);
constexpr std::size_t kRho = static_cast<std::size_t>(Param::rho);
constexpr std::size_t kX0 = static_cast<std::size_t>(Param::x0);
constexpr std::size_t kY0 = static_cast<std::size_t>(Param::y0);
constexpr std::size_t kZ0 = static_cast<std::size_t>(Param::z0);

void check_layout(std::span<const double> params, std::span<const double> masses) {
  if (params.size() % kParamsPerBody != 0) {
    throw ValidationError("parameter vector length must be a multiple of 5");
  }
  if (params.size() / kParamsPerBody != masses.size()) {
    throw ValidationError("one mass per body is required");
  }
}

Spheroid spheroid_of(std::span<const double> params, std::size_t k, double mass) {
  const double* p = params.data() + k * kParamsPerBody;
  Spheroid s;
  s.eps = p[kEps];
  s.rho = p[kRho];
  s.x0 = p[kX0];
  s.y0 = p[kY0];
  s.z0 = p[kZ0];
  s.a = semiaxis_from_mass(mass, s.eps, s.rho);
  return s;
}

// Per-body station fields, recomputed only for bodies whose block changed.
// Bodies are summed in model order, so values match field_at bit for bit.
class FieldCache {
 public:
  FieldCache(std::span<const Station> stations, const MassLaw& law) : law_(law) {
    for (const auto& st : stations) {
      if (st.vz) measured_.push_back(st);
    }
    fields_.assign(law_.mass.size(), std::vector<double>(measured_.size(), 0.0));
    blocks_.assign(law_.mass.size(), std::vector<double>(kParamsPerBody, std::nan("")));
  }

  double misfit(std::span<const double> params) {
    for (std::size_t k = 0; k < law_.mass.size(); ++k) update(params, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < measured_.size(); ++i) {
      double v = 0.0;
      for (std::size_t k = 0; k < law_.mass.size(); ++k) v += fields_[k][i];
      const double r = *measured_[i].vz - v;
      sum += r * r;
    }
    return sum;
  }

 private:
  void update(std::span<const double> params, std::size_t k) {
    const auto block = params.subspan(k * kParamsPerBody, kParamsPerBody);
    if (std::equal(block.begin(), block.end(), blocks_[k].begin())) return;
    const Spheroid s = spheroid_of(params, k, law_.at(k, block[kZ0]));
    for (std::size_t i = 0; i < measured_.size(); ++i) {
      try {
        fields_[k][i] = spheroid_vz(s, measured_[i]);
      } catch (const DomainError& e) {
        throw DomainError("body " + std::to_string(k) + ": " + e.what());
      }
    }
    std::copy(block.begin(), block.end(), blocks_[k].begin());
  }

  std::vector<Station> measured_;
  const MassLaw& law_;
  std::vector<std::vector<double>> fields_;
  std::vector<std::vector<double>> blocks_;
};

double floor_for(std::size_t j, const DecrementalOptions& o) {
  switch (j % kParamsPerBody) {
    case kEps:
      return o.eps_floor;
    case kRho:
      return o.rho_floor;
    default:
      return o.coordinate_floor;
  }
}

}  // namespace

const char* param_name(Param p) {
  switch (p) {
    case Param::eps:
      return "eps";
    case Param::rho:
      return "rho";
    case Param::x0:
      return "x0";
    case Param::y0:
      return "y0";
    case Param::z0:
      return "z0";
  }
  return "?";
}

ParameterBox ParameterBox::from_bodies(std::span<const BodyBounds> bodies) {
  ParameterBox box;
  for (const auto& b : bodies) {
    const double lo[] = {b.eps_min, b.rho_min, b.x0_min, b.y0_min, b.z0_min};
    const double hi[] = {b.eps_max, b.rho_max, b.x0_max, b.y0_max, b.z0_max};
    for (std::size_t j = 0; j < kParamsPerBody; ++j) {
      box.names.emplace_back(param_name(static_cast<Param>(j)));
      box.p_min.push_back(lo[j]);
      box.p_max.push_back(hi[j]);
    }
  }
  box.validate();
  return box;
}

std::vector<double> ParameterBox::midpoint() const {
  std::vector<double> out(size());
  for (std::size_t j = 0; j < size(); ++j) out[j] = mid(j);
  return out;
}

std::vector<double> ParameterBox::weights() const {
  std::vector<double> out(size());
  for (std::size_t j = 0; j < size(); ++j) out[j] = weight(j);
  return out;
}

BodyBounds ParameterBox::body(std::size_t k) const {
  const std::size_t o = k * kParamsPerBody;
  BodyBounds b;
  b.eps_min = p_min[o + kEps];
  b.eps_max = p_max[o + kEps];
  b.rho_min = p_min[o + kRho];
  b.rho_max = p_max[o + kRho];
  b.x0_min = p_min[o + kX0];
  b.x0_max = p_max[o + kX0];
  b.y0_min = p_min[o + kY0];
  b.y0_max = p_max[o + kY0];
  b.z0_min = p_min[o + kZ0];
  b.z0_max = p_max[o + kZ0];
  return b;
}

bool ParameterBox::contains(std::span<const double> params) const {
  if (params.size() != size()) return false;
  for (std::size_t j = 0; j < size(); ++j) {
    if (!(params[j] >= p_min[j] && params[j] <= p_max[j])) return false;
  }
  return true;
}

void ParameterBox::validate() const {
  if (p_min.size() != p_max.size() || names.size() != p_min.size()) {
    throw ValidationError("parameter box: names and bounds differ in length");
  }
  if (size() == 0 || size() % kParamsPerBody != 0) {
    throw ValidationError("parameter box: expected 5 parameters per body");
  }
  for (std::size_t j = 0; j < size(); ++j) {
    const auto label = "parameter box: " + names[j] + " of body " +
                       std::to_string(j / kParamsPerBody + 1);
    if (!std::isfinite(p_min[j]) || !std::isfinite(p_max[j]) || !(p_min[j] < p_max[j])) {
      throw ValidationError(label + " needs finite p_min < p_max");
    }
    if (mid(j) == 0.0) throw ValidationError(label + " has a zero midpoint");
    const std::size_t r = j % kParamsPerBody;
    if ((r == kEps || r == kRho || r == kZ0) && !(p_min[j] > 0.0)) {
      throw ValidationError(label + " must be positive");
    }
  }
}

double MassLaw::at(std::size_t body, double z0) const {
  if (!follows_depth()) return mass[body];
  const double r = z0 / depth[body];
  return mass[body] * r * r;
}

std::vector<double> MassLaw::evaluate(std::span<const double> params) const {
  std::vector<double> out(mass.size());
  for (std::size_t k = 0; k < mass.size(); ++k) out[k] = at(k, params[k * kParamsPerBody + kZ0]);
  return out;
}

void enforce_burial(ParameterBox& box, const MassLaw& law, std::span<const double> current) {
  if (law.mass.size() != box.bodies() || (law.follows_depth() && law.depth.size() != box.bodies())) {
    throw ValidationError("enforce_burial: one mass per body");
  }
  if (!current.empty() && current.size() != box.size()) {
    throw ValidationError("enforce_burial: current point has the wrong length");
  }
  constexpr double margin = 1.0 + 1e-6;
  for (std::size_t k = 0; k < box.bodies(); ++k) {
    const std::size_t o = k * kParamsPerBody;
    const auto where = "body " + std::to_string(k + 1);
    if (!(law.mass[k] > 0.0) || (law.follows_depth() && !(law.depth[k] > 0.0))) {
      throw ValidationError("enforce_burial: mass and reference depth of " + where + " must be positive");
    }
    // c^3 = eps^2 * 3 M / (4 pi rho) for a = (M / ((4/3) pi eps rho))^(1/3).
    auto c_cubed = [&](double eps, double rho, double z) {
      return eps * eps * 3.0 * law.at(k, z) / (4.0 * kPi * rho);
    };
    auto buried = [&](double z) {
      return c_cubed(box.p_max[o + kEps], box.p_min[o + kRho], z) < z * z * z;
    };
    // Shallowest depth at which the widest, lightest shape is buried.
    auto shallowest = [&] {
      const double e = box.p_max[o + kEps];
      const double r = box.p_min[o + kRho];
      if (law.follows_depth()) {
        return e * e * 3.0 * law.mass[k] / (4.0 * kPi * r * law.depth[k] * law.depth[k]) * margin;
      }
      return std::cbrt(c_cubed(e, r, 0.0)) * margin;
    };

    double& z_lo = box.p_min[o + kZ0];
    const double z_hi = box.p_max[o + kZ0];
    if (buried(z_lo)) continue;
    const double target = shallowest();
    const double limit = current.empty() ? z_hi : current[o + kZ0];
    if (target < limit) {
      z_lo = target;
      continue;
    }
    if (current.empty()) {
      throw ValidationError("enforce_burial: " + where + " cannot be buried inside its z0 bounds with this mass");
    }
    // Pin z0_min at the current depth and narrow eps, then rho, toward the
    // current point until the deepest-reaching shape fits above it.
    const double z = current[o + kZ0];
    z_lo = z;
    const double z3 = z * z * z / margin;
    double& e_hi = box.p_max[o + kEps];
    const double e_fit = std::sqrt(z3 * 4.0 * kPi * box.p_min[o + kRho] / (3.0 * law.at(k, z)));
    e_hi = std::max(std::min(e_hi, e_fit), current[o + kEps]);
    if (buried(z_lo)) continue;
    double& r_lo = box.p_min[o + kRho];
    r_lo = std::min(std::max(r_lo, c_cubed(e_hi, 1.0, z) / z3), current[o + kRho]);
    if (!buried(z_lo) || !(box.p_min[o + kEps] < e_hi) || !(r_lo < box.p_max[o + kRho]) || !(z_lo < z_hi)) {
      throw ValidationError("enforce_burial: " + where + " is not safely buried at the current point");
    }
  }
}

std::vector<Spheroid> spheroids_from(std::span<const double> params, std::span<const double> masses) {
  check_layout(params, masses);
  std::vector<Spheroid> out;
  out.reserve(masses.size());
  for (std::size_t k = 0; k < masses.size(); ++k) out.push_back(spheroid_of(params, k, masses[k]));
  return out;
}

double misfit(std::span<const double> params, std::span<const double> masses,
              std::span<const Station> stations) {
  const auto bodies = spheroids_from(params, masses);
  std::vector<Body> model(bodies.begin(), bodies.end());
  std::vector<Station> measured;
  for (const auto& st : stations) {
    if (st.vz) measured.push_back(st);
  }
  const auto v = field_at(model, measured);
  double sum = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double r = *measured[i].vz - v[i];
    sum += r * r;
  }
  return sum;
}

double stabilizer(std::span<const double> params, const ParameterBox& box, Functional kind) {
  if (params.size() != box.size()) throw ValidationError("stabilizer: parameter count mismatch");
  double sum = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double d = kind == Functional::f1 ? params[j] - box.mid(j) : params[j];
    sum += box.weight(j) * d * d;
  }
  return sum;
}

double tikhonov_f1(std::span<const double> params, std::span<const double> masses,
                   std::span<const Station> stations, const ParameterBox& box, double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be non-negative");
  return misfit(params, masses, stations) + alpha * stabilizer(params, box, Functional::f1);
}

double tikhonov_f2(std::span<const double> params, std::span<const double> masses,
                   std::span<const Station> stations, const ParameterBox& box, double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be non-negative");
  return misfit(params, masses, stations) + alpha * stabilizer(params, box, Functional::f2);
}

std::vector<double> coordinate_descent(const Objective& objective, const ParameterBox& box,
                                       std::vector<double> start, const DescentOptions& options,
                                       DescentTrace* trace) {
  if (start.size() != box.size()) throw ValidationError("coordinate_descent: start has the wrong length");
  if (!box.contains(start)) throw ValidationError("coordinate_descent: start lies outside the box");
  if (!(options.tol > 0.0)) throw ValidationError("coordinate_descent: tol must be positive");

  static const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  std::vector<double> p = std::move(start);
  double f = objective(p);
  if (trace) {
    trace->values.assign(1, f);
    trace->feasible = true;
  }

  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    const double f_sweep = f;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double keep = p[j];
      double best_x = keep;
      double best_f = f;
      auto eval = [&](double x) {
        p[j] = x;
        const double v = objective(p);
        if (v < best_f) {
          best_f = v;
          best_x = x;
        }
        return v;
      };
      double lo = box.p_min[j];
      double hi = box.p_max[j];
      double x1 = hi - inv_phi * (hi - lo);
      double x2 = lo + inv_phi * (hi - lo);
      double f1 = eval(x1);
      double f2 = eval(x2);
      for (std::size_t it = 2; it < options.line_iterations; ++it) {
        if (f1 <= f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - inv_phi * (hi - lo);
          f1 = eval(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + inv_phi * (hi - lo);
          f2 = eval(x2);
        }
      }
      p[j] = best_x;
      f = best_f;
      if (trace && !(p[j] >= box.p_min[j] && p[j] <= box.p_max[j])) trace->feasible = false;
    }
    if (trace) trace->values.push_back(f);
    if (f == 0.0 || f_sweep - f <= options.tol * std::abs(f_sweep)) break;
  }
  return p;
}

void DecrementalOptions::validate() const {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be non-negative");
  if (rounds < 1) throw ValidationError("rounds must be at least 1");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ValidationError("shrink factor must lie in (0, 1)");
  if (!(descent.tol > 0.0)) throw ValidationError("descent tolerance must be positive");
  if (descent.max_sweeps < 1) throw ValidationError("max_sweeps must be at least 1");
  if (descent.line_iterations < 2) throw ValidationError("line search needs at least 2 iterations");
  if (!(eps_floor > 0.0 && rho_floor > 0.0 && coordinate_floor > 0.0)) {
    throw ValidationError("half-width floors must be positive");
  }
}

std::vector<double> refresh_masses(std::span<const double> params, std::span<const double> masses,
                                   std::span<const Station> stations) {
  const auto bodies = spheroids_from(params, masses);
  std::vector<const Station*> measured;
  for (const auto& st : stations) {
    if (st.vz) measured.push_back(&st);
  }
  std::vector<std::vector<double>> own(bodies.size(), std::vector<double>(measured.size()));
  for (std::size_t k = 0; k < bodies.size(); ++k) {
    for (std::size_t i = 0; i < measured.size(); ++i) own[k][i] = spheroid_vz(bodies[k], *measured[i]);
  }

  std::vector<double> out(masses.begin(), masses.end());
  for (std::size_t k = 0; k < bodies.size(); ++k) {
    const Spheroid& b = bodies[k];
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < measured.size(); ++i) {
      double rest = *measured[i]->vz;
      for (std::size_t j = 0; j < bodies.size(); ++j) {
        if (j != k) rest -= own[j][i];
      }
      num += rest * own[k][i];
      den += own[k][i] * own[k][i];
    }
    if (!(den > 0.0) || !(num > 0.0)) continue;
    double mass = masses[k] * std::clamp(num / den, 0.5, 2.0);
    // Keep c = eps a below 0.999 z0.
    const double a_cap = 0.999 * b.z0 / b.eps;
    mass = std::min(mass, 4.0 / 3.0 * kPi * b.eps * b.rho * a_cap * a_cap * a_cap);
    out[k] = mass;
  }
  return out;
}

InversionResult decremental_solve(std::span<const Station> stations, const ParameterBox& initial_box,
                                  std::span<const double> masses, const DecrementalOptions& options,
                                  std::span<const double> start, std::span<const double> mass_depths) {
  options.validate();
  initial_box.validate();
  const std::size_t m = initial_box.bodies();
  if (masses.size() != m) throw ValidationError("decremental_solve: one mass per body");
  if (!mass_depths.empty() && mass_depths.size() != m) {
    throw ValidationError("decremental_solve: one mass depth per body");
  }

  InversionResult result;
  result.alpha = options.alpha;
  result.functional = options.functional;

  ParameterBox box = initial_box;
  std::vector<double> p = start.empty() ? box.midpoint() : std::vector<double>(start.begin(), start.end());
  if (!box.contains(p)) throw ValidationError("decremental_solve: start lies outside the box");

  const bool follow = options.mass_update == MassUpdate::peak_relation;
  auto depths_of = [&](std::span<const double> q) {
    std::vector<double> z(m);
    for (std::size_t k = 0; k < m; ++k) z[k] = q[k * kParamsPerBody + kZ0];
    return z;
  };
  MassLaw law{{masses.begin(), masses.end()}, {}};
  if (follow) {
    law.depth = mass_depths.empty() ? depths_of(p) : std::vector<double>(mass_depths.begin(), mass_depths.end());
    law.mass = law.evaluate(p);
    law.depth = depths_of(p);
  }
  enforce_burial(box, law, p);

  for (std::size_t round = 0; round < options.rounds; ++round) {
    FieldCache cache(stations, law);
    const Objective objective = [&](std::span<const double> q) {
      return cache.misfit(q) + options.alpha * stabilizer(q, box, options.functional);
    };
    if (round == 0) result.f_initial = objective(p);
    p = coordinate_descent(objective, box, std::move(p), options.descent);
    result.f_final = objective(p);
    result.rounds = round + 1;
    result.box = box;

    if (follow) {
      law.mass = refresh_masses(p, law.evaluate(p), stations);
      law.depth = depths_of(p);
    }
    if (round + 1 == options.rounds) break;

    bool all_at_floor = true;
    ParameterBox next = box;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double lo = box.p_min[j];
      const double hi = box.p_max[j];
      const double half = 0.5 * (hi - lo);
      const double floor = floor_for(j, options);
      const double h = std::min(half, std::max(options.shrink * half, floor));
      if (h < half) all_at_floor = false;
      const double near = 0.01 * (hi - lo);
      next.p_min[j] = p[j] - lo <= near ? lo : std::max(lo, p[j] - h);
      next.p_max[j] = hi - p[j] <= near ? hi : std::min(hi, p[j] + h);
    }
    if (all_at_floor) break;
    enforce_burial(next, law, p);
    box = std::move(next);
  }

  result.params = p;
  result.masses = law.evaluate(p);
  result.bodies = spheroids_from(p, result.masses);
  for (const auto& b : result.bodies) result.volumes.push_back(spheroid_volume(b));
  result.misfit = misfit(p, result.masses, stations);
  return result;
}

double solution_error(std::span<const double> params, std::span<const double> exact,
                      std::span<const double> weights) {
  if (params.size() != exact.size() || params.size() != weights.size() || params.empty()) {
    throw ValidationError("solution_error: vectors must be non-empty and of equal length");
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double d = params[j] - exact[j];
    sum += weights[j] * d * d;
  }
  return std::sqrt(sum / static_cast<double>(params.size()));
}

void PipelineOptions::validate() const {
  if (!(min_separation > 0.0)) throw ValidationError("min_separation must be positive");
  if (!(resolve.valley_threshold >= 0.0 && resolve.valley_threshold <= 1.0) ||
      !(resolve.noise_threshold >= 0.0)) {
    throw ValidationError("valley threshold must lie in [0, 1], noise threshold non-negative");
  }
  if (!(merge_gain > 0.0 && merge_gain < 1.0)) throw ValidationError("merge_gain must lie in (0, 1)");
  if (!(xy_half_width > 0.0)) throw ValidationError("xy half-width must be positive");
  if (!(z0_low > 0.0 && z0_low < 1.0 && z0_high > 1.0)) {
    throw ValidationError("z0 factors need 0 < low < 1 < high");
  }
  if (!(eps_min > 0.0 && eps_min < eps_max)) throw ValidationError("eps bounds need 0 < min < max");
  if (!(rho_min > 0.0 && rho_min < rho_max)) throw ValidationError("rho bounds need 0 < min < max");
  inversion.validate();
}

ParameterBox initial_box(std::span<const PeakCandidate> peaks,
                         std::span<const DepthMassEstimate> estimates, const PipelineOptions& options) {
  if (peaks.size() != estimates.size()) throw ValidationError("initial_box: one estimate per peak");
  std::vector<BodyBounds> bounds;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    double h = options.xy_half_width;
    for (std::size_t j = 0; j < peaks.size(); ++j) {
      if (j != k) h = std::min(h, 0.5 * std::hypot(peaks[j].x0 - peaks[k].x0, peaks[j].y0 - peaks[k].y0));
    }
    const auto& e = estimates[k];
    BodyBounds b;
    b.eps_min = options.eps_min;
    b.eps_max = options.eps_max;
    b.rho_min = options.rho_min;
    b.rho_max = options.rho_max;
    b.x0_min = peaks[k].x0 - h;
    b.x0_max = peaks[k].x0 + h;
    b.y0_min = peaks[k].y0 - h;
    b.y0_max = peaks[k].y0 + h;
    b.z0_min = std::min(options.z0_low * e.z0, e.z0_min);
    b.z0_max = std::max(options.z0_high * e.z0, e.z0_max);
    bounds.push_back(b);
  }
  return ParameterBox::from_bodies(bounds);
}

MassSeed seed_masses(std::span<const Station> stations, const ParameterBox& box, double noise_level,
                     const PipelineOptions& options) {
  options.validate();
  box.validate();
  if (!(noise_level >= 0.0)) throw ValidationError("noise_level must be non-negative");
  const FieldGrid grid = rasterize_stations(stations, options.raster);
  auto peaks = find_peaks(grid, options.min_separation);
  const auto accepted = resolve_bodies(peaks, grid, noise_level, options.resolve);

  std::vector<PeakCandidate> poles;
  for (std::size_t k = 0; k < box.bodies(); ++k) {
    const BodyBounds b = box.body(k);
    const auto inside = std::find_if(accepted.begin(), accepted.end(), [&](const PeakCandidate& p) {
      return p.x0 >= b.x0_min && p.x0 <= b.x0_max && p.y0 >= b.y0_min && p.y0 <= b.y0_max;
    });
    if (inside != accepted.end()) {
      poles.push_back(*inside);
    } else {
      const double x = 0.5 * (b.x0_min + b.x0_max);
      const double y = 0.5 * (b.y0_min + b.y0_max);
      poles.push_back({x, y, grid.sample(x, y), true, {}, false});
    }
  }
  const auto estimates = estimate_bodies(poles, stations, options.estimate);
  MassSeed out;
  for (const auto& e : estimates) {
    out.masses.push_back(e.mass);
    out.depths.push_back(e.z0);
  }
  return out;
}

namespace {

struct Fit {
  std::vector<DepthMassEstimate> estimates;
  ParameterBox box;
  InversionResult inversion;
};

Fit invert_from(std::span<const PeakCandidate> bodies, std::vector<DepthMassEstimate> estimates,
                std::span<const Station> stations, const PipelineOptions& options) {
  Fit fit;
  fit.estimates = std::move(estimates);
  fit.box = initial_box(bodies, fit.estimates, options);
  // Start from the box midpoint at the estimated depth, with the estimated
  // mass capped so that the starting spheroid is buried.
  auto start = fit.box.midpoint();
  std::vector<double> masses;
  for (std::size_t k = 0; k < bodies.size(); ++k) {
    const double z0 = fit.estimates[k].z0;
    start[param_index(k, Param::z0)] = z0;
    const double eps = start[param_index(k, Param::eps)];
    const double rho = start[param_index(k, Param::rho)];
    const double a_cap = 0.9 * z0 / eps;
    masses.push_back(std::min(fit.estimates[k].mass, 4.0 / 3.0 * kPi * eps * rho * a_cap * a_cap * a_cap));
  }
  fit.inversion = decremental_solve(stations, fit.box, masses, options.inversion, start);
  return fit;
}

// Depth and mass of every fitted body from the stations less the fields of
// the other fitted bodies, probed around the fitted position.
std::vector<DepthMassEstimate> reestimate(const InversionResult& inv, std::vector<PeakCandidate>& bodies,
                                          std::span<const Station> stations, const EstimateOptions& options) {
  std::vector<DepthMassEstimate> out;
  for (std::size_t k = 0; k < inv.bodies.size(); ++k) {
    bodies[k].x0 = inv.bodies[k].x0;
    bodies[k].y0 = inv.bodies[k].y0;
    std::vector<Station> stripped(stations.begin(), stations.end());
    for (auto& st : stripped) {
      if (!st.vz) continue;
      for (std::size_t j = 0; j < inv.bodies.size(); ++j) {
        if (j != k) *st.vz -= spheroid_vz(inv.bodies[j], st);
      }
    }
    try {
      out.push_back(estimate_body(bodies[k], stripped, inv.bodies[k].z0, {}, options));
    } catch (const EstimationError&) {
      DepthMassEstimate keep;
      keep.z0 = keep.z0_min = keep.z0_max = inv.bodies[k].z0;
      keep.mass = inv.masses[k];
      out.push_back(keep);
    }
  }
  return out;
}

Fit fit_bodies(std::span<const PeakCandidate> peaks, std::span<const Station> stations,
               const PipelineOptions& options) {
  std::vector<PeakCandidate> bodies(peaks.begin(), peaks.end());
  Fit best = invert_from(bodies, estimate_bodies(bodies, stations, options.estimate), stations, options);
  Fit current = best;
  for (std::size_t pass = 0; pass < options.reseed_passes; ++pass) {
    auto estimates = reestimate(current.inversion, bodies, stations, options.estimate);
    current = invert_from(bodies, std::move(estimates), stations, options);
    if (current.inversion.misfit < best.inversion.misfit) best = current;
  }
  return best;
}

std::string describe(const PeakCandidate& p) {
  std::ostringstream os;
  os.precision(4);
  os << "pole at (" << p.x0 << ", " << p.y0 << ")";
  return os.str();
}

}  // namespace

PipelineResult refine_pipeline(std::span<const Station> stations, double noise_level,
                               const PipelineOptions& options) {
  options.validate();
  if (!(noise_level >= 0.0)) throw ValidationError("noise_level must be non-negative");

  PipelineResult out;
  out.grid = rasterize_stations(stations, options.raster);
  out.peaks = find_peaks(out.grid, options.min_separation);
  out.accepted = resolve_bodies(out.peaks, out.grid, noise_level, options.resolve);
  if (out.accepted.empty()) {
    out.diagnostics.push_back("no positive maxima in the gridded field; nothing to invert");
    return out;
  }

  Fit best = fit_bodies(out.accepted, stations, options);
  if (options.resolve_merged && noise_level <= options.resolve.noise_threshold) {
    const double strongest = out.peaks.front().vz_peak;
    for (auto& cand : out.peaks) {
      if (cand.accepted) continue;
      if (noise_level * strongest / cand.vz_peak > options.resolve.noise_threshold) continue;
      auto trial_set = out.accepted;
      trial_set.push_back(cand);
      trial_set.back().accepted = true;
      std::stable_sort(trial_set.begin(), trial_set.end(),
                       [](const PeakCandidate& a, const PeakCandidate& b) { return a.vz_peak > b.vz_peak; });
      Fit trial = fit_bodies(trial_set, stations, options);
      std::ostringstream os;
      os.precision(4);
      os << describe(cand) << ": misfit " << best.inversion.misfit << " -> " << trial.inversion.misfit;
      if (trial.inversion.misfit <= options.merge_gain * best.inversion.misfit) {
        cand.accepted = true;
        out.accepted = std::move(trial_set);
        best = std::move(trial);
        out.diagnostics.push_back(os.str() + ", resolved as a separate body");
      } else {
        out.diagnostics.push_back(os.str() + ", kept merged");
      }
    }
  }
  out.estimates = std::move(best.estimates);
  out.initial_box = std::move(best.box);
  out.inversion = std::move(best.inversion);
  return out;
}

}  // namespace gravinv
