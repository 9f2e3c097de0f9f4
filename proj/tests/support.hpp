#pragma once

// Helpers shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gravinv/model.hpp"

namespace gravinv::testing {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  std::mt19937_64& engine() { return gen_; }

private:
  std::mt19937_64 gen_;
};

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::abs(b); }

/// Gauss-Legendre nodes and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

/// V_z of a spheroid by quadrature over its footprint: each vertical chord
/// contributes gamma rho [1/sqrt(h^2 + z_top^2) - 1/sqrt(h^2 + z_bottom^2)].
/// Radius d = a sin(theta) absorbs the square-root edge of the chord length;
/// the periodic angle uses the trapezoid rule.
inline double chord_quadrature_vz(const Spheroid& s, double px, double py, int n_radial = 96,
                                  int n_angle = 256) {
  std::vector<double> gx, gw;
  gauss_legendre(n_radial, gx, gw);
  const double c = s.eps * s.a;
  double sum = 0.0;
  for (int i = 0; i < n_radial; ++i) {
    const double theta = 0.25 * kPi * (gx[i] + 1.0);  // [0, pi/2]
    const double d = s.a * std::sin(theta);
    const double half = c * std::cos(theta);
    const double jac = s.a * std::cos(theta) * 0.25 * kPi * gw[i] * d;  // dd * d
    double ring = 0.0;
    for (int k = 0; k < n_angle; ++k) {
      const double phi = 2.0 * kPi * k / n_angle;
      const double hx = px - (s.x0 + d * std::cos(phi));
      const double hy = py - (s.y0 + d * std::sin(phi));
      const double h2 = hx * hx + hy * hy;
      const double top = s.z0 - half;
      const double bottom = s.z0 + half;
      ring += 1.0 / std::sqrt(h2 + top * top) - 1.0 / std::sqrt(h2 + bottom * bottom);
    }
    sum += jac * ring * (2.0 * kPi / n_angle);
  }
  return kGamma * s.rho * sum;
}

}  // namespace gravinv::testing
