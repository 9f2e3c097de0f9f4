#include "gravinv/bulakh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "gravinv/errors.hpp"

namespace gravinv {

double mu_of_v(double v) {
  if (!(v > 0.0 && v < 1.0)) throw DomainError("mu_of_v: v must lie in (0, 1)");
  const double w = std::cbrt(v * v);
  return std::sqrt(w / (1.0 - w));
}

double mu_general(double v, double psi) {
  if (!(v > 0.0 && v < 1.0)) throw DomainError("mu_general: v must lie in (0, 1)");
  if (!(psi >= 0.0 && psi < 1.0)) throw DomainError("mu_general: psi must lie in [0, 1)");
  const double w = std::cbrt(v * v);
  const double num = w - psi * psi;
  if (!(num > 0.0)) {
    throw InconsistentProbeError("mu_general: v^(2/3) <= psi^2, no buried sphere fits the probes");
  }
  return std::sqrt(num / (1.0 - w));
}

double depth_from_pair(double vz_p, double vz_c, double s, double delta) {
  if (!(vz_p > 0.0) || !(vz_p < vz_c)) throw DomainError("depth_from_pair: need 0 < vzP < vzC");
  if (!(delta >= 0.0) || !(delta < s)) throw DomainError("depth_from_pair: need 0 <= delta < s");
  return mu_general(vz_p / vz_c, delta / s) * s;
}

double mass_from_point(double z0, double delta, double vz_c) {
  if (!(z0 > 0.0) || !(delta >= 0.0) || !(vz_c > 0.0)) {
    throw DomainError("mass_from_point: need z0 > 0, delta >= 0, vzC > 0");
  }
  const double r2 = z0 * z0 + delta * delta;
  return PhysicalConstants::inverse_gamma * r2 * std::sqrt(r2) / z0 * vz_c;
}

namespace {

bool owned_by(const Station& st, const PeakCandidate& peak, std::span<const PeakCandidate> peaks) {
  const double own = std::hypot(st.x - peak.x0, st.y - peak.y0);
  return std::none_of(peaks.begin(), peaks.end(), [&](const PeakCandidate& other) {
    return std::hypot(st.x - other.x0, st.y - other.y0) < own;
  });
}

}  // namespace

DepthMassEstimate estimate_body(const PeakCandidate& peak, std::span<const Station> stations,
                                double z0_hint, std::span<const PeakCandidate> peaks,
                                const EstimateOptions& options) {
  if (!(z0_hint > 0.0)) throw ValidationError("estimate_body: z0_hint must be positive");

  const Station* centre = nullptr;
  double delta = std::numeric_limits<double>::infinity();
  for (const auto& st : stations) {
    if (!st.vz) continue;
    const double d = std::hypot(st.x - peak.x0, st.y - peak.y0);
    if (d < delta) {
      delta = d;
      centre = &st;
    }
  }
  if (centre == nullptr) throw EstimationError("estimate_body: no measured stations");
  const double vz_c = *centre->vz;
  if (!(vz_c > 0.0)) throw EstimationError("estimate_body: reference intensity is not positive");

  DepthMassEstimate est;
  double z_sum = 0.0;
  double m_sum = 0.0;
  est.z0_min = std::numeric_limits<double>::infinity();
  est.z0_max = -std::numeric_limits<double>::infinity();
  const double lo = options.window_low * z0_hint;
  const double hi = options.window_high * z0_hint;
  for (const auto& st : stations) {
    if (!st.vz || &st == centre) continue;
    const double s = std::hypot(st.x - peak.x0, st.y - peak.y0);
    if (s < lo || s > hi || s <= delta) continue;
    if (!(*st.vz < vz_c)) continue;
    if (!peaks.empty() && !owned_by(st, peak, peaks)) continue;
    try {
      const double z0 = depth_from_pair(*st.vz, vz_c, s, delta);
      const double mass = mass_from_point(z0, delta, vz_c);
      z_sum += z0;
      m_sum += mass;
      est.z0_min = std::min(est.z0_min, z0);
      est.z0_max = std::max(est.z0_max, z0);
      ++est.n_pairs;
    } catch (const DomainError&) {
      ++est.n_rejected;
    }
  }
  if (est.n_pairs == 0) throw EstimationError("estimate_body: no valid probe pair");
  est.z0 = z_sum / static_cast<double>(est.n_pairs);
  est.mass = m_sum / static_cast<double>(est.n_pairs);
  est.spread = est.z0_max - est.z0_min;
  return est;
}

double median_station_spacing(std::span<const Station> stations) {
  if (stations.size() < 2) throw ValidationError("station spacing needs at least two stations");
  std::vector<double> nearest;
  nearest.reserve(stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < stations.size(); ++j) {
      if (i == j) continue;
      best = std::min(best, std::hypot(stations[i].x - stations[j].x, stations[i].y - stations[j].y));
    }
    nearest.push_back(best);
  }
  const auto mid = nearest.begin() + static_cast<std::ptrdiff_t>(nearest.size() / 2);
  std::nth_element(nearest.begin(), mid, nearest.end());
  if (nearest.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(nearest.begin(), mid);
  return 0.5 * (lower + upper);
}

double point_mass_vz(double mass, double z0, double offset) {
  const double r2 = z0 * z0 + offset * offset;
  return kGamma * mass * z0 / (r2 * std::sqrt(r2));
}

namespace {

DepthMassEstimate estimate_or_fallback(const PeakCandidate& peak, std::span<const Station> stations,
                                       double hint, std::span<const PeakCandidate> peaks,
                                       const EstimateOptions& options) {
  DepthMassEstimate est;
  try {
    est = estimate_body(peak, stations, hint, peaks, options);
  } catch (const EstimationError&) {
    // Fall back to the hint depth and the point-mass relation at C.
    double delta = std::numeric_limits<double>::infinity();
    double vz_c = 0.0;
    for (const auto& st : stations) {
      if (!st.vz) continue;
      const double d = std::hypot(st.x - peak.x0, st.y - peak.y0);
      if (d < delta) {
        delta = d;
        vz_c = *st.vz;
      }
    }
    est = {};
    est.z0 = est.z0_min = est.z0_max = hint;
    est.mass = vz_c > 0.0 ? mass_from_point(hint, delta, vz_c) : 0.0;
    return est;
  }
  try {
    return estimate_body(peak, stations, est.z0, peaks, options);
  } catch (const EstimationError&) {
    return est;
  }
}

}  // namespace

namespace {

const Station* nearest_measured(const PeakCandidate& peak, std::span<const Station> stations) {
  const Station* best = nullptr;
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& st : stations) {
    if (!st.vz) continue;
    const double d = std::hypot(st.x - peak.x0, st.y - peak.y0);
    if (d < dist) {
      dist = d;
      best = &st;
    }
  }
  return best;
}

// Masses that reproduce the measured intensity at every reference station
// as a superposition of point masses at the current depths.
std::vector<double> joint_masses(std::span<const PeakCandidate> peaks,
                                 std::span<const Station> stations,
                                 const std::vector<DepthMassEstimate>& est) {
  const std::size_t m = peaks.size();
  Eigen::MatrixXd g(m, m);
  Eigen::VectorXd v(m);
  for (std::size_t r = 0; r < m; ++r) {
    const Station* c = nearest_measured(peaks[r], stations);
    v(static_cast<Eigen::Index>(r)) = *c->vz;
    for (std::size_t k = 0; k < m; ++k) {
      g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          point_mass_vz(1.0, est[k].z0, std::hypot(c->x - peaks[k].x0, c->y - peaks[k].y0));
    }
  }
  const Eigen::VectorXd mass = g.fullPivLu().solve(v);
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; ++k) out[k] = mass(static_cast<Eigen::Index>(k));
  return out;
}

}  // namespace

std::vector<DepthMassEstimate> estimate_bodies(std::span<const PeakCandidate> peaks,
                                               std::span<const Station> stations,
                                               const EstimateOptions& options) {
  if (!(options.settle > 0.0)) throw ValidationError("settle tolerance must be positive");
  const double hint = median_station_spacing(stations);
  std::vector<DepthMassEstimate> out;
  out.reserve(peaks.size());
  for (const auto& peak : peaks) {
    out.push_back(estimate_or_fallback(peak, stations, hint, peaks, options));
  }
  if (peaks.size() < 2) return out;

  std::vector<Station> stripped(stations.begin(), stations.end());
  for (std::size_t pass = 0; pass < options.neighbour_passes; ++pass) {
    const auto mass = joint_masses(peaks, stations, out);
    if (!std::all_of(mass.begin(), mass.end(), [](double x) { return x > 0.0; })) break;
    std::vector<DepthMassEstimate> next;
    next.reserve(peaks.size());
    for (std::size_t k = 0; k < peaks.size(); ++k) {
      for (std::size_t i = 0; i < stations.size(); ++i) {
        if (!stations[i].vz) continue;
        double v = *stations[i].vz;
        for (std::size_t j = 0; j < peaks.size(); ++j) {
          if (j == k) continue;
          v -= point_mass_vz(mass[j], out[j].z0,
                             std::hypot(stations[i].x - peaks[j].x0, stations[i].y - peaks[j].y0));
        }
        stripped[i].vz = v;
      }
      next.push_back(estimate_or_fallback(peaks[k], stripped, out[k].z0, {}, options));
    }
    double moved = 0.0;
    for (std::size_t k = 0; k < peaks.size(); ++k) {
      moved = std::max(moved, std::abs(next[k].z0 - out[k].z0) / out[k].z0);
    }
    if (moved <= options.settle) {
      out = std::move(next);
      break;
    }
    if (pass + 1 == options.neighbour_passes) {
      for (std::size_t k = 0; k < peaks.size(); ++k) {
        next[k].z0 = 0.5 * (next[k].z0 + out[k].z0);
        next[k].mass = 0.5 * (next[k].mass + out[k].mass);
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace gravinv
