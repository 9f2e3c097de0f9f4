#pragma once

// Depth and mass of a body under the buried homogeneous sphere assumption,
// from ratios of surface intensities (the Bulakh relations and their
// generalization to an off-peak reference point).

#include <cstddef>
#include <span>
#include <vector>

#include "gravinv/detect.hpp"
#include "gravinv/model.hpp"

namespace gravinv {

struct DepthMassEstimate {
  double z0 = 0.0;
  double mass = 0.0;
  std::size_t n_pairs = 0;
  double spread = 0.0;          // max - min of the per-pair depths
  double z0_min = 0.0;
  double z0_max = 0.0;
  std::size_t n_rejected = 0;   // pairs dropped for v or psi out of range
};

/// mu(v) = sqrt(v^(2/3) / (1 - v^(2/3))), v strictly inside (0, 1).
double mu_of_v(double v);

/// mu(v, psi) = sqrt((v^(2/3) - psi^2) / (1 - v^(2/3))). Throws
/// InconsistentProbeError when v^(2/3) <= psi^2.
double mu_general(double v, double psi);

/// z0 = mu(vzP / vzC, delta / s) * s.
double depth_from_pair(double vz_p, double vz_c, double s, double delta);

/// M = (z0^2 + delta^2)^(3/2) / z0 * vzC / gamma.
double mass_from_point(double z0, double delta, double vz_c);

struct EstimateOptions {
  double window_low = 0.5;   // probe distance window, multiples of z0_hint
  double window_high = 2.0;
  // Passes in which the point-mass fields of the other bodies, at their
  // previous estimates, are removed from the stations first. Passes stop
  // once no depth moves by more than `settle` relative; a run that hits the
  // cap returns the mean of its last two passes.
  std::size_t neighbour_passes = 20;
  double settle = 1e-3;
};

/// One averaging pass over probe pairs (P, C) around `peak`. C is the
/// station nearest the peak; P ranges over owned stations with s in the
/// window and vzP < vzC. `peaks` lists every accepted peak (including this
/// one) and decides station ownership. Throws EstimationError when no pair
/// survives.
DepthMassEstimate estimate_body(const PeakCandidate& peak, std::span<const Station> stations,
                                double z0_hint, std::span<const PeakCandidate> peaks = {},
                                const EstimateOptions& options = {});

/// Median nearest-neighbour distance between stations.
double median_station_spacing(std::span<const Station> stations);

/// Vertical attraction of a point mass (10^9 t) buried at depth z0, at
/// horizontal distance `offset`.
double point_mass_vz(double mass, double z0, double offset);

/// Two-pass estimate for each accepted peak: first with the median station
/// spacing as the depth hint, then with the first-pass depth. A body whose
/// estimate fails keeps the hint depth and the point-mass relation at C.
/// With several peaks, `neighbour_passes` further passes repeat the estimate
/// on stations stripped of the other bodies' point-mass fields.
std::vector<DepthMassEstimate> estimate_bodies(std::span<const PeakCandidate> peaks,
                                               std::span<const Station> stations,
                                               const EstimateOptions& options = {});

}  // namespace gravinv
