#include "gravinv/forward.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>

#include "gravinv/errors.hpp"
#include "gravinv/forward_detail.hpp"

namespace gravinv {

namespace detail {

double oblate_tau(double q, double z0_over_r) {
  // tau = [A + sqrt(A^2 + B)] / 2 with A = 1 - q^2, B = 4 q^2 (z0/r)^2.
  const double q2 = q * q;
  const double A = 1.0 - q2;
  const double B = 4.0 * q2 * z0_over_r * z0_over_r;
  const double root = std::sqrt(A * A + B);
  if (A >= 0.0) return 0.5 * (A + root);
  return 0.5 * B / (root - A);
}

double prolate_t(double q, double s_over_r) {
  const double q2 = q * q;
  const double A = 1.0 - q2;
  const double B = 4.0 * q2 * s_over_r * s_over_r;
  const double root = std::sqrt(A * A + B);
  const double t = A >= 0.0 ? 0.5 * (A + root) : 0.5 * B / (root - A);
  return std::max(t, kProlateFloor);
}

}  // namespace detail

double FieldGrid::sample(double x, double y) const {
  const double fx = std::clamp((x - x_min) / dx(), 0.0, static_cast<double>(nx - 1));
  const double fy = std::clamp((y - y_min) / dy(), 0.0, static_cast<double>(ny - 1));
  const auto i = std::min(static_cast<std::size_t>(fx), nx - 2);
  const auto j = std::min(static_cast<std::size_t>(fy), ny - 2);
  const double u = fx - static_cast<double>(i);
  const double v = fy - static_cast<double>(j);
  return (1.0 - u) * (1.0 - v) * at(i, j) + u * (1.0 - v) * at(i + 1, j) +
         (1.0 - u) * v * at(i, j + 1) + u * v * at(i + 1, j + 1);
}

void FieldGrid::validate() const {
  if (nx < 2 || ny < 2) throw ValidationError("grid needs at least 2 x 2 nodes");
  if (!(x_min < x_max) || !(y_min < y_max)) throw ValidationError("grid domain is empty");
  if (values.size() != nx * ny) throw ValidationError("grid value count does not match nx * ny");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("grid values must be finite");
  }
}

double bar_vz(const BarCell& cell, double rho, const Station& p) {
  const double ddx = p.x - cell.xc;
  const double ddy = p.y - cell.yc;
  const double h2 = ddx * ddx + ddy * ddy;
  double sum = 0.0;
  const auto& segs = cell.segments;
  // Touching segments are coalesced so that a split column evaluates exactly
  // like the unsplit one.
  for (std::size_t k = 0; k < segs.size();) {
    const double top = segs[k].z_min;
    double bottom = segs[k].z_max;
    std::size_t next = k + 1;
    while (next < segs.size() && segs[next].z_min == bottom) {
      bottom = segs[next].z_max;
      ++next;
    }
    sum += 1.0 / std::sqrt(h2 + top * top) - 1.0 / std::sqrt(h2 + bottom * bottom);
    k = next;
  }
  return kGamma * rho * sum * cell.dx * cell.dy;
}

double body_vz(const BarBody& body, const Station& p) {
  double total = 0.0;
  for (const auto& cell : body.cells) total += bar_vz(cell, body.rho, p);
  return total;
}

double spheroid_vz(const Spheroid& s, const Station& p) {
  if (!(s.a > 0.0) || !(s.eps > 0.0) || !(s.z0 > 0.0)) {
    throw DomainError("spheroid_vz: a, eps and z0 must be positive");
  }
  const double dx = p.x - s.x0;
  const double dy = p.y - s.y0;
  const double s2 = dx * dx + dy * dy;
  const double c = s.c();
  if (s2 / (s.a * s.a) + (s.z0 * s.z0) / (c * c) <= 1.0) {
    throw DomainError("spheroid_vz: station lies inside or on the spheroid");
  }
  const double r2 = s2 + s.z0 * s.z0;
  const double r = std::sqrt(r2);
  const double scale = 4.0 * kPi * kGamma * s.rho;

  if (std::abs(s.eps - 1.0) <= kSphereBand) {
    return scale / 3.0 * s.a * s.a * s.a * s.z0 / (r2 * r);
  }
  if (s.eps < 1.0) {
    const double e = std::sqrt(1.0 - s.eps * s.eps);
    const double q = e * s.a / r;
    const double tau = detail::oblate_tau(q, s.z0 / r);
    const double pp = q / std::sqrt(tau);
    return scale * (s.eps / (e * e * e)) * (pp - std::atan(pp)) * s.z0;
  }
  const double e = std::sqrt(s.eps * s.eps - 1.0);
  const double q = e * s.a / r;
  const double t = detail::prolate_t(q, std::sqrt(s2) / r);
  const double pp = q / std::sqrt(t);
  const double root = std::sqrt(1.0 + pp * pp);
  return scale * (s.eps / (e * e * e)) * (std::log(pp + root) - pp / root) * s.z0;
}

namespace {

double body_value(const Body& body, const Station& p) {
  return std::visit(
      [&](const auto& b) -> double {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, Spheroid>) {
          return spheroid_vz(b, p);
        } else {
          return body_vz(b, p);
        }
      },
      body);
}

}  // namespace

std::vector<double> field_at(std::span<const Body> model, std::span<const Station> stations) {
  std::vector<double> out(stations.size(), 0.0);
  for (std::size_t i = 0; i < stations.size(); ++i) {
    double v = 0.0;
    for (std::size_t b = 0; b < model.size(); ++b) {
      try {
        v += body_value(model[b], stations[i]);
      } catch (const DomainError& e) {
        throw DomainError("body " + std::to_string(b) + ": " + e.what());
      }
    }
    out[i] = v;
  }
  return out;
}

FieldGrid field_grid(std::span<const Body> model, const GridDomain& domain, std::size_t nx,
                     std::size_t ny) {
  FieldGrid grid{domain.x_min, domain.x_max, domain.y_min, domain.y_max, nx, ny, {}};
  if (nx < 2 || ny < 2) throw ValidationError("grid needs at least 2 x 2 nodes");
  if (!(domain.x_min < domain.x_max) || !(domain.y_min < domain.y_max)) {
    throw ValidationError("grid domain is empty");
  }
  std::vector<Station> nodes;
  nodes.reserve(nx * ny);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) nodes.push_back({grid.x(i), grid.y(j), {}});
  }
  grid.values = field_at(model, nodes);
  return grid;
}

}  // namespace gravinv
