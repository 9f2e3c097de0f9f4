#pragma once

// Synthetic deposits, surveys and measurement noise.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gravinv/forward.hpp"
#include "gravinv/model.hpp"

namespace gravinv {

/// Ground-truth description of one scenario body.
struct ExactParams {
  double a = 0.0;
  double eps = 0.0;
  double rho = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double z0 = 0.0;
  double volume = 0.0;
  double mass = 0.0;

  Spheroid spheroid() const { return {a, eps, rho, x0, y0, z0}; }
};

struct Scenario {
  std::string name;
  std::vector<BarBody> bodies;
  std::vector<Station> stations;  // positions only
  std::vector<ExactParams> exact_params;
  std::vector<BodyBounds> reference_bounds;  // expert constraint boxes, if any
  double noise_sigma = 0.0;     // absolute, mGal
  double noise_relative = 0.0;  // fraction of |V_z| per station
  std::uint64_t seed = 0;
  double domain_size = 15.0;

  std::vector<Body> model() const;
};

/// Square lattice of pitch `step` covering the disc of radius a around the
/// axis; each cell whose centre is inside the disc carries the vertical
/// chord of the spheroid through that centre.
BarBody discretize_spheroid_to_bars(const Spheroid& s, double step);

/// Total bar volume sum(dx * dy * sum(z_max - z_min)).
double bar_volume(const BarBody& body);

/// Adds N(0, sigma^2) deviates. The stream is std::mt19937_64 seeded with
/// `seed`, mapped to (0, 1] with 53-bit resolution and fed through the
/// Box-Muller transform, so a seed names the same sequence everywhere.
std::vector<double> add_noise(std::span<const double> values, double sigma, std::uint64_t seed);

/// Multiplicative variant: value + fraction * |value| * N(0, 1), same stream.
std::vector<double> add_relative_noise(std::span<const double> values, double fraction,
                                       std::uint64_t seed);

/// Standard normal deviates of the stream used by add_noise.
std::vector<double> gaussian_deviates(std::size_t count, std::uint64_t seed);

std::vector<std::string> scenario_names();

/// Builds "example1" or "example2". Throws ValidationError otherwise.
Scenario scenario(const std::string& name);

/// Noise-free field of the scenario bodies at its stations.
std::vector<double> exact_field(const Scenario& sc);

/// Survey noise as a fraction of the strongest exact station value, the
/// `noise_level` expected by detection.
double noise_level(const Scenario& sc);

/// Stations carrying the exact field plus the scenario noise.
std::vector<Station> simulate_survey(const Scenario& sc, std::uint64_t seed);
inline std::vector<Station> simulate_survey(const Scenario& sc) {
  return simulate_survey(sc, sc.seed);
}

/// Low-discrepancy station layout over [0, size]^2: the additive R2
/// sequence started from a seeded offset.
std::vector<Station> r2_layout(std::size_t count, double size, std::uint64_t seed);

/// `count` R2 points mapped onto the disc of the given radius about the origin.
std::vector<Station> r2_disc_layout(std::size_t count, double radius, std::uint64_t seed);

}  // namespace gravinv
