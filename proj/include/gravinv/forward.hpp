#pragma once

// Direct problem: vertical intensity V_z on the surface from bar assemblies
// and from spheroids in closed form.

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "gravinv/model.hpp"

namespace gravinv {

/// Rectangular surface domain [x_min, x_max] x [y_min, y_max].
struct GridDomain {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
};

/// Regular raster of V_z including both domain endpoints. values is
/// row-major: values[j * nx + i] sits at (x(i), y(j)).
struct FieldGrid {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::vector<double> values;

  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double dy() const noexcept { return (y_max - y_min) / static_cast<double>(ny - 1); }
  double x(std::size_t i) const noexcept { return x_min + static_cast<double>(i) * dx(); }
  double y(std::size_t j) const noexcept { return y_min + static_cast<double>(j) * dy(); }
  double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }
  double& at(std::size_t i, std::size_t j) { return values[j * nx + i]; }

  /// Bilinear interpolation; points outside the domain are clamped to it.
  double sample(double x, double y) const;

  void validate() const;
};

using Body = std::variant<BarBody, Spheroid>;

/// V_z at (x, y, 0) of one bar (midpoint rule over the footprint). Segments
/// of a voided column are summed.
double bar_vz(const BarCell& cell, double rho, const Station& p);

double body_vz(const BarBody& body, const Station& p);

/// Closed-form V_z of a homogeneous spheroid. |eps - 1| <= kSphereBand uses
/// the point-mass formula. Throws DomainError if the station is not outside
/// the body.
double spheroid_vz(const Spheroid& s, const Station& p);

inline constexpr double kSphereBand = 1e-9;

/// Superposition over all bodies, one value per station in input order.
/// Bodies are accumulated in model order for every station.
std::vector<double> field_at(std::span<const Body> model, std::span<const Station> stations);

/// Evaluates field_at on the nx x ny lattice spanning `domain`.
FieldGrid field_grid(std::span<const Body> model, const GridDomain& domain, std::size_t nx,
                     std::size_t ny);

}  // namespace gravinv
