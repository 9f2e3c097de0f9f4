#pragma once

// Domain records shared by the forward and inverse solvers.
//
// Units throughout: lengths in km, intensities in mGal, densities in g/cm^3
// (numerically 10^9 t per km^3) and masses in 10^9 t. The z axis points
// down with the origin on the surface.

#include <numbers>
#include <optional>
#include <vector>

namespace gravinv {

/// Gravitational constant in practical units: mGal * km^2 per 10^9 t.
///
/// G = 6.674e-11 m^3 kg^-1 s^-2 with 10^9 t = 1e12 kg, 1 km = 1e3 m and
/// 1 mGal = 1e-5 m/s^2 gives exactly 6.674. Its reciprocal (0.1498) is the
/// rounded 0.15 that appears in the sphere mass relations.
struct PhysicalConstants {
  static constexpr double gamma = 6.674;
  static constexpr double inverse_gamma = 1.0 / gamma;
};

inline constexpr double kGamma = PhysicalConstants::gamma;
inline constexpr double kPi = std::numbers::pi;

/// Surface measurement point (x, y, 0), optionally with a measured V_z.
struct Station {
  double x = 0.0;
  double y = 0.0;
  std::optional<double> vz;
};

struct DepthSegment {
  double z_min = 0.0;
  double z_max = 0.0;
};

/// Vertical bar with a rectangular footprint centred at (xc, yc). Several
/// segments describe a column crossed by voids.
struct BarCell {
  double xc = 0.0;
  double yc = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  std::vector<DepthSegment> segments;
};

/// Homogeneous body assembled from vertical bars.
struct BarBody {
  double rho = 0.0;
  std::vector<BarCell> cells;
};

/// Homogeneous ellipsoid of revolution about the vertical axis.
///
/// a is the equatorial semiaxis, eps = c/a the aspect ratio (oblate below 1,
/// prolate above), (x0, y0, z0) the centre with z0 the depth.
struct Spheroid {
  double a = 0.0;
  double eps = 1.0;
  double rho = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
  double z0 = 0.0;

  double c() const noexcept { return eps * a; }
};

/// Lower and upper bounds on the free parameters of one spheroid.
struct BodyBounds {
  double eps_min = 0.2, eps_max = 2.2;
  double rho_min = 1.0, rho_max = 3.5;
  double x0_min = 0.0, x0_max = 0.0;
  double y0_min = 0.0, y0_max = 0.0;
  double z0_min = 0.0, z0_max = 0.0;
};

void validate(const Station& station);
void validate(const BarCell& cell);
void validate(const BarBody& body);
/// Checks a > 0, eps > 0 and that the top of the body lies below the surface.
void validate(const Spheroid& spheroid);

double spheroid_volume(const Spheroid& s);
/// (4/3) pi eps rho a^3.
double spheroid_mass(const Spheroid& s);
/// Inverse of spheroid_mass for the semiaxis; throws DomainError on
/// non-positive arguments.
double semiaxis_from_mass(double mass, double eps, double rho);

}  // namespace gravinv
