#include "gravinv/detect.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "gravinv/errors.hpp"

namespace gravinv {

namespace {

struct RawMax {
  std::size_t i;
  std::size_t j;
  double value;
  bool boundary;
};

bool is_strict_max(const FieldGrid& g, std::size_t i, std::size_t j) {
  const double v = g.at(i, j);
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      if (di == 0 && dj == 0) continue;
      const long ii = static_cast<long>(i) + di;
      const long jj = static_cast<long>(j) + dj;
      if (ii < 0 || jj < 0 || ii >= static_cast<long>(g.nx) || jj >= static_cast<long>(g.ny)) {
        continue;
      }
      if (!(v > g.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(jj)))) return false;
    }
  }
  return true;
}

PeakCandidate refine(const FieldGrid& g, const RawMax& m, double radius) {
  const double px = g.x(m.i);
  const double py = g.y(m.j);
  const double level = 0.8 * m.value;
  const auto reach_i = static_cast<long>(std::ceil(radius / g.dx()));
  const auto reach_j = static_cast<long>(std::ceil(radius / g.dy()));
  double wsum = 0.0;
  double wx = 0.0;
  double wy = 0.0;
  for (long dj = -reach_j; dj <= reach_j; ++dj) {
    const long jj = static_cast<long>(m.j) + dj;
    if (jj < 0 || jj >= static_cast<long>(g.ny)) continue;
    for (long di = -reach_i; di <= reach_i; ++di) {
      const long ii = static_cast<long>(m.i) + di;
      if (ii < 0 || ii >= static_cast<long>(g.nx)) continue;
      const auto ui = static_cast<std::size_t>(ii);
      const auto uj = static_cast<std::size_t>(jj);
      const double x = g.x(ui);
      const double y = g.y(uj);
      if (std::hypot(x - px, y - py) > radius) continue;
      const double excess = g.at(ui, uj) - level;
      if (excess <= 0.0) continue;
      wsum += excess;
      wx += excess * x;
      wy += excess * y;
    }
  }
  PeakCandidate peak;
  peak.x0 = wsum > 0.0 ? wx / wsum : px;
  peak.y0 = wsum > 0.0 ? wy / wsum : py;
  peak.vz_peak = m.value;
  peak.on_boundary = m.boundary;
  return peak;
}

}  // namespace

std::vector<PeakCandidate> find_peaks(const FieldGrid& grid, double min_separation) {
  grid.validate();
  if (!(min_separation > 0.0)) throw ValidationError("min_separation must be positive");

  std::vector<RawMax> raw;
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const double v = grid.at(i, j);
      if (v > 0.0 && is_strict_max(grid, i, j)) {
        const bool boundary = i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.ny;
        raw.push_back({i, j, v, boundary});
      }
    }
  }
  std::stable_sort(raw.begin(), raw.end(),
                   [](const RawMax& a, const RawMax& b) { return a.value > b.value; });

  std::vector<RawMax> kept;
  for (const auto& m : raw) {
    const bool shadowed = std::any_of(kept.begin(), kept.end(), [&](const RawMax& k) {
      return std::hypot(grid.x(k.i) - grid.x(m.i), grid.y(k.j) - grid.y(m.j)) < min_separation;
    });
    if (!shadowed) kept.push_back(m);
  }

  std::vector<PeakCandidate> out;
  out.reserve(kept.size());
  for (const auto& m : kept) out.push_back(refine(grid, m, min_separation));
  return out;
}

double valley_fraction(const PeakCandidate& a, const PeakCandidate& b, const FieldGrid& grid) {
  const double dx = b.x0 - a.x0;
  const double dy = b.y0 - a.y0;
  if (std::hypot(dx, dy) <= 1e-12) {
    throw DegeneratePairError("valley_fraction: the two peaks coincide");
  }
  const double pole = 0.5 * (a.vz_peak + b.vz_peak);
  if (!(pole > 0.0)) throw DomainError("valley_fraction: pole intensities must be positive");
  double lowest = grid.sample(a.x0, a.y0);
  for (std::size_t k = 1; k < kValleySamples; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(kValleySamples - 1);
    lowest = std::min(lowest, grid.sample(a.x0 + t * dx, a.y0 + t * dy));
  }
  return std::clamp((pole - lowest) / pole, 0.0, 1.0);
}

std::vector<PeakCandidate> resolve_bodies(std::vector<PeakCandidate>& peaks, const FieldGrid& grid,
                                          double noise_level, const ResolveOptions& options) {
  if (!(noise_level >= 0.0)) throw ValidationError("noise_level must be non-negative");
  std::stable_sort(peaks.begin(), peaks.end(), [](const PeakCandidate& a, const PeakCandidate& b) {
    return a.vz_peak > b.vz_peak;
  });
  std::vector<PeakCandidate> accepted;
  if (peaks.empty()) return accepted;

  const double strongest = peaks.front().vz_peak;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    auto& cand = peaks[k];
    cand.valley_to_nearest.reset();
    if (k == 0) {
      cand.accepted = true;
      accepted.push_back(cand);
      continue;
    }
    const double relative_noise = noise_level * strongest / cand.vz_peak;
    bool keep = relative_noise <= options.noise_threshold;

    double nearest = INFINITY;
    for (const auto& other : accepted) {
      const double valley = valley_fraction(other, cand, grid);
      const double d = std::hypot(other.x0 - cand.x0, other.y0 - cand.y0);
      if (d < nearest) {
        nearest = d;
        cand.valley_to_nearest = valley;
      }
      // The strongest pole fails the noise test for every pair it is in.
      if (valley < options.valley_threshold) keep = false;
    }
    if (noise_level > options.noise_threshold) keep = false;
    cand.accepted = keep;
    if (keep) accepted.push_back(cand);
  }
  return accepted;
}

namespace {

// Green's function of the biharmonic operator in the plane, r^2 (ln r - 1),
// written in terms of r^2.
double biharmonic_green(double r2) {
  return r2 > 0.0 ? r2 * (0.5 * std::log(r2) - 1.0) : 0.0;
}

void fill_biharmonic(FieldGrid& g, const std::vector<const Station*>& measured, double smoothing) {
  // Solve [G + s I, P; P^T, 0] [w; c] = [v; 0] with P = [1 x y], then
  // evaluate sum w_k G(|x - x_k|) + c0 + c1 x + c2 y at every node.
  const auto n = static_cast<Eigen::Index>(measured.size());
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(n + 3, n + 3);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Station& si = *measured[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < n; ++j) {
      const Station& sj = *measured[static_cast<std::size_t>(j)];
      const double dx = si.x - sj.x;
      const double dy = si.y - sj.y;
      system(i, j) = biharmonic_green(dx * dx + dy * dy);
    }
    system(i, i) += smoothing;
    system(i, n) = system(n, i) = 1.0;
    system(i, n + 1) = system(n + 1, i) = si.x;
    system(i, n + 2) = system(n + 2, i) = si.y;
    rhs(i) = *si.vz;
  }
  const Eigen::VectorXd w = system.fullPivLu().solve(rhs);
  if (!w.allFinite()) throw DomainError("spline gridding: singular station configuration");

  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double x = g.x(i);
      const double y = g.y(j);
      double v = w(n) + w(n + 1) * x + w(n + 2) * y;
      for (Eigen::Index k = 0; k < n; ++k) {
        const Station& sk = *measured[static_cast<std::size_t>(k)];
        const double dx = sk.x - x;
        const double dy = sk.y - y;
        v += w(k) * biharmonic_green(dx * dx + dy * dy);
      }
      g.at(i, j) = v;
    }
  }
}

void fill_inverse_distance(FieldGrid& g, const std::vector<const Station*>& measured,
                           double power) {
  const double half_power = 0.5 * power;
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const double x = g.x(i);
      const double y = g.y(j);
      double wsum = 0.0;
      double vsum = 0.0;
      bool exact = false;
      for (const auto* st : measured) {
        const double d2 = (st->x - x) * (st->x - x) + (st->y - y) * (st->y - y);
        if (d2 < 1e-24) {
          g.at(i, j) = *st->vz;
          exact = true;
          break;
        }
        const double w = half_power == 1.0 ? 1.0 / d2 : std::pow(d2, -half_power);
        wsum += w;
        vsum += w * *st->vz;
      }
      if (!exact) g.at(i, j) = vsum / wsum;
    }
  }
}

}  // namespace

FieldGrid rasterize_stations(std::span<const Station> stations, const RasterOptions& options) {
  std::vector<const Station*> measured;
  for (const auto& st : stations) {
    if (st.vz) measured.push_back(&st);
  }
  if (measured.size() < 3) throw ValidationError("rasterization needs at least three measured stations");
  if (options.nx < 2 || options.ny < 2) throw ValidationError("raster needs at least 2 x 2 nodes");
  if (!(options.smoothing >= 0.0)) throw ValidationError("spline smoothing must be non-negative");
  if (!(options.power > 0.0)) throw ValidationError("inverse-distance power must be positive");

  FieldGrid g;
  g.x_min = g.x_max = measured.front()->x;
  g.y_min = g.y_max = measured.front()->y;
  for (const auto* st : measured) {
    g.x_min = std::min(g.x_min, st->x);
    g.x_max = std::max(g.x_max, st->x);
    g.y_min = std::min(g.y_min, st->y);
    g.y_max = std::max(g.y_max, st->y);
  }
  if (!(g.x_min < g.x_max) || !(g.y_min < g.y_max)) {
    throw ValidationError("stations are collinear along an axis; bounding box is degenerate");
  }
  g.nx = options.nx;
  g.ny = options.ny;
  g.values.assign(g.nx * g.ny, 0.0);
  if (options.method == Gridding::biharmonic_spline) {
    fill_biharmonic(g, measured, options.smoothing);
  } else {
    fill_inverse_distance(g, measured, options.power);
  }
  return g;
}

}  // namespace gravinv
