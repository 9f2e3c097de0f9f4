#include "gravinv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gravinv/errors.hpp"

namespace gravinv {

namespace {

double unit_open_closed(std::mt19937_64& gen) {
  // (k + 1) / 2^53 for k uniform in [0, 2^53): never 0, so log() is finite.
  return static_cast<double>((gen() >> 11) + 1) * 0x1.0p-53;
}

double fractional(double x) { return x - std::floor(x); }

struct BodySpec {
  double eps;
  double rho;
  double x0;
  double y0;
  double z0;
  double volume;  // tabulated exact volume, km^3
  double step;    // bar discretization step, km
};

ExactParams exact_from_spec(const BodySpec& b) {
  // The semiaxis is chosen so that the spheroid has the tabulated volume.
  const double a = std::cbrt(b.volume / (4.0 / 3.0 * kPi * b.eps));
  return {a, b.eps, b.rho, b.x0, b.y0, b.z0, b.volume, b.rho * b.volume};
}

struct LayoutSpec {
  std::size_t base;         // R2 stations over the whole square
  std::size_t per_body;     // extra stations around each body
  double radius_over_depth; // cluster disc radius as a multiple of z0
  std::uint64_t seed;
};

Scenario build(std::string name, const std::vector<BodySpec>& specs, const LayoutSpec& layout,
               double sigma, double relative, std::uint64_t seed) {
  Scenario sc;
  sc.name = std::move(name);
  sc.noise_sigma = sigma;
  sc.noise_relative = relative;
  sc.seed = seed;
  for (const auto& spec : specs) {
    const ExactParams exact = exact_from_spec(spec);
    sc.exact_params.push_back(exact);
    sc.bodies.push_back(discretize_spheroid_to_bars(exact.spheroid(), spec.step));
  }
  sc.stations = r2_layout(layout.base, sc.domain_size, layout.seed);
  for (std::size_t b = 0; b < sc.exact_params.size(); ++b) {
    const auto& e = sc.exact_params[b];
    const auto disc = r2_disc_layout(layout.per_body, layout.radius_over_depth * e.z0,
                                     layout.seed + b + 1);
    for (const auto& st : disc) {
      const double x = std::clamp(e.x0 + st.x, 0.0, sc.domain_size);
      const double y = std::clamp(e.y0 + st.y, 0.0, sc.domain_size);
      sc.stations.push_back({x, y, {}});
    }
  }

  for (std::size_t b = 0; b < sc.exact_params.size(); ++b) {
    const auto& e = sc.exact_params[b];
    std::size_t near = 0;
    for (const auto& st : sc.stations) {
      if (std::hypot(st.x - e.x0, st.y - e.y0) <= 2.0 * e.z0) ++near;
    }
    if (near < 4) {
      throw ValidationError("scenario " + sc.name + ": body " + std::to_string(b + 1) +
                            " has fewer than 4 stations within 2 z0");
    }
  }
  return sc;
}

}  // namespace

std::vector<Body> Scenario::model() const { return {bodies.begin(), bodies.end()}; }

BarBody discretize_spheroid_to_bars(const Spheroid& s, double step) {
  if (!(step > 0.0)) throw ValidationError("discretization step must be positive");
  validate(s);
  BarBody body{s.rho, {}};
  const double c = s.c();
  if (step >= 2.0 * s.a) {
    body.cells.push_back({s.x0, s.y0, step, step, {{s.z0 - c, s.z0 + c}}});
    return body;
  }
  // Cell centres sit at x0 + (k + 1/2) step, symmetric about the axis.
  const auto half_count = static_cast<long>(std::ceil(s.a / step));
  for (long j = -half_count; j < half_count; ++j) {
    const double yc = s.y0 + (static_cast<double>(j) + 0.5) * step;
    for (long i = -half_count; i < half_count; ++i) {
      const double xc = s.x0 + (static_cast<double>(i) + 0.5) * step;
      const double d2 = (xc - s.x0) * (xc - s.x0) + (yc - s.y0) * (yc - s.y0);
      const double ratio = d2 / (s.a * s.a);
      if (ratio >= 1.0) continue;
      const double half = c * std::sqrt(1.0 - ratio);
      body.cells.push_back({xc, yc, step, step, {{s.z0 - half, s.z0 + half}}});
    }
  }
  return body;
}

double bar_volume(const BarBody& body) {
  double v = 0.0;
  for (const auto& cell : body.cells) {
    double len = 0.0;
    for (const auto& seg : cell.segments) len += seg.z_max - seg.z_min;
    v += cell.dx * cell.dy * len;
  }
  return v;
}

std::vector<double> gaussian_deviates(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> out;
  out.reserve(count + 1);
  while (out.size() < count) {
    const double u1 = unit_open_closed(gen);
    const double u2 = unit_open_closed(gen);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    out.push_back(radius * std::cos(angle));
    out.push_back(radius * std::sin(angle));
  }
  out.resize(count);
  return out;
}

std::vector<double> add_noise(std::span<const double> values, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("noise sigma must be non-negative");
  std::vector<double> out(values.begin(), values.end());
  if (sigma == 0.0) return out;
  const auto z = gaussian_deviates(values.size(), seed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * z[i];
  return out;
}

std::vector<double> add_relative_noise(std::span<const double> values, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction >= 0.0)) throw ValidationError("relative noise must be non-negative");
  std::vector<double> out(values.begin(), values.end());
  if (fraction == 0.0) return out;
  const auto z = gaussian_deviates(values.size(), seed);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += fraction * std::abs(out[i]) * z[i];
  return out;
}

std::vector<Station> r2_layout(std::size_t count, double size, std::uint64_t seed) {
  constexpr double plastic = 1.32471795724474602596;
  constexpr double alpha1 = 1.0 / plastic;
  constexpr double alpha2 = 1.0 / (plastic * plastic);
  std::mt19937_64 gen(seed);
  const double ox = unit_open_closed(gen);
  const double oy = unit_open_closed(gen);
  std::vector<Station> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const double k = static_cast<double>(n + 1);
    out.push_back({size * fractional(ox + k * alpha1), size * fractional(oy + k * alpha2), {}});
  }
  return out;
}

std::vector<Station> r2_disc_layout(std::size_t count, double radius, std::uint64_t seed) {
  // Equal-area map of the unit-square R2 points onto the disc.
  auto square = r2_layout(count, 1.0, seed);
  for (auto& st : square) {
    const double rr = radius * std::sqrt(st.x);
    const double angle = 2.0 * kPi * st.y;
    st = {rr * std::cos(angle), rr * std::sin(angle), {}};
  }
  return square;
}

std::vector<std::string> scenario_names() { return {"example1", "example2"}; }

Scenario scenario(const std::string& name) {
  if (name == "example1") {
    // Two bodies: an oblate ore body and a prolate intrusion.
    const std::vector<BodySpec> specs{
        {0.51, 1.6, 5.7, 5.3, 4.2, 39.67, 0.25},
        {1.96, 2.6, 10.7, 11.1, 3.8, 19.06, 0.125},
    };
    Scenario sc = build(name, specs, {25, 10, 1.0, 0x45u}, 1.0, 0.0, 20140901u);
    // Expert constraint boxes for both bodies.
    sc.reference_bounds = {
        {0.2, 0.6, 1.1, 1.7, 5.4, 6.0, 5.2, 6.0, 4.0, 5.8},
        {1.8, 2.2, 2.3, 2.9, 10.3, 11.0, 10.2, 12.0, 2.3, 4.3},
    };
    return sc;
  }
  if (name == "example2") {
    const std::vector<BodySpec> specs{
        {0.51, 1.6, 2.8, 3.3, 4.2, 29.81, 0.125},  {1.56, 2.3, 10.3, 11.7, 3.8, 15.17, 0.125},
        {1.0, 1.5, 2.8, 11.8, 4.0, 21.81, 0.125},  {1.4, 2.7, 10.8, 1.2, 4.4, 11.51, 0.125},
        {0.7, 3.3, 13.5, 6.3, 3.9, 7.18, 0.125},
    };
    return build(name, specs, {48, 5, 1.0, 0x73u}, 0.0, 0.03, 20140902u);
  }
  std::string names;
  for (const auto& n : scenario_names()) names += (names.empty() ? "" : ", ") + n;
  throw ValidationError("unknown scenario '" + name + "' (available: " + names + ")");
}

std::vector<double> exact_field(const Scenario& sc) {
  const auto model = sc.model();
  return field_at(model, sc.stations);
}

double noise_level(const Scenario& sc) {
  const auto exact = exact_field(sc);
  double peak = 0.0;
  for (double v : exact) peak = std::max(peak, std::abs(v));
  if (!(peak > 0.0)) throw ValidationError("scenario " + sc.name + " has no field at its stations");
  return sc.noise_relative + sc.noise_sigma / peak;
}

std::vector<Station> simulate_survey(const Scenario& sc, std::uint64_t seed) {
  const auto exact = exact_field(sc);
  auto noisy = sc.noise_relative > 0.0 ? add_relative_noise(exact, sc.noise_relative, seed)
                                       : add_noise(exact, sc.noise_sigma, seed);
  std::vector<Station> out = sc.stations;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].vz = noisy[i];
  return out;
}

}  // namespace gravinv
