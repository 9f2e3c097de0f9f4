#include "gravinv/model.hpp"

#include <cmath>
#include <string>

#include "gravinv/errors.hpp"

namespace gravinv {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

void validate(const Station& station) {
  require(std::isfinite(station.x) && std::isfinite(station.y),
          "station coordinates must be finite");
  if (station.vz) require(std::isfinite(*station.vz), "station vz must be finite");
}

void validate(const BarCell& cell) {
  require(std::isfinite(cell.xc) && std::isfinite(cell.yc), "bar centre must be finite");
  require(cell.dx > 0.0 && cell.dy > 0.0, "bar footprint must have positive width");
  require(!cell.segments.empty(), "bar must have at least one depth segment");
  double previous_bottom = 0.0;
  for (const auto& seg : cell.segments) {
    require(seg.z_min > 0.0 && seg.z_min < seg.z_max,
            "bar segment must satisfy 0 < z_min < z_max");
    require(seg.z_min >= previous_bottom, "bar segments must be sorted and disjoint");
    previous_bottom = seg.z_max;
  }
}

void validate(const BarBody& body) {
  require(std::isfinite(body.rho) && body.rho != 0.0, "body density must be finite and nonzero");
  require(!body.cells.empty(), "bar body must contain at least one cell");
  for (const auto& cell : body.cells) validate(cell);
}

void validate(const Spheroid& s) {
  require(std::isfinite(s.a) && s.a > 0.0, "spheroid semiaxis a must be positive");
  require(std::isfinite(s.eps) && s.eps > 0.0, "spheroid ratio eps must be positive");
  require(std::isfinite(s.rho), "spheroid density must be finite");
  require(std::isfinite(s.x0) && std::isfinite(s.y0) && std::isfinite(s.z0),
          "spheroid centre must be finite");
  require(s.z0 > s.c(), "spheroid must be buried (z0 > eps * a)");
}

double spheroid_volume(const Spheroid& s) { return 4.0 / 3.0 * kPi * s.eps * s.a * s.a * s.a; }

double spheroid_mass(const Spheroid& s) { return s.rho * spheroid_volume(s); }

double semiaxis_from_mass(double mass, double eps, double rho) {
  if (!(mass > 0.0) || !(eps > 0.0) || !(rho > 0.0)) {
    throw DomainError("semiaxis_from_mass: mass, eps and rho must be positive");
  }
  return std::cbrt(mass / (4.0 / 3.0 * kPi * eps * rho));
}

}  // namespace gravinv
