#pragma once

// Number of bodies and their surface positions from an anomaly raster.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gravinv/forward.hpp"
#include "gravinv/model.hpp"

namespace gravinv {

struct PeakCandidate {
  double x0 = 0.0;
  double y0 = 0.0;
  double vz_peak = 0.0;
  bool accepted = false;
  std::optional<double> valley_to_nearest;
  bool on_boundary = false;  // centroid refinement is unreliable there
};

/// Strict 8-neighbour maxima with positive value. Maxima within
/// `min_separation` of a stronger one are suppressed; survivors are moved to
/// the centroid of nearby cells above 80 % of the peak, weighted by their
/// excess over that level. Sorted by descending vz_peak.
std::vector<PeakCandidate> find_peaks(const FieldGrid& grid, double min_separation);

inline constexpr std::size_t kValleySamples = 65;

/// (V - v) / V with V the mean of the two pole intensities and v the lowest
/// bilinear sample on the chord between them, clamped to [0, 1].
double valley_fraction(const PeakCandidate& a, const PeakCandidate& b, const FieldGrid& grid);

struct ResolveOptions {
  double valley_threshold = 0.20;
  double noise_threshold = 0.20;
};

/// Keeps two poles apart when the valley between them is at least
/// valley_threshold and the noise relative to each pole is at most
/// noise_threshold. `noise_level` is the survey noise as a fraction of the
/// strongest pole; for a weaker pole it scales by vz_max / vz_pole.
/// Returns the accepted peaks, strongest first. `peaks` is updated in place
/// with the decisions.
std::vector<PeakCandidate> resolve_bodies(std::vector<PeakCandidate>& peaks, const FieldGrid& grid,
                                          double noise_level, const ResolveOptions& options = {});

enum class Gridding {
  biharmonic_spline,  // minimum-curvature surface through the stations
  inverse_distance,
};

struct RasterOptions {
  std::size_t nx = 61;
  std::size_t ny = 61;
  Gridding method = Gridding::biharmonic_spline;
  double smoothing = 1.0;  // diagonal regularization of the spline system
  double power = 2.0;      // inverse-distance exponent
};

/// Interpolates scattered measured stations onto a raster spanning their
/// bounding box.
FieldGrid rasterize_stations(std::span<const Station> stations, const RasterOptions& options = {});

}  // namespace gravinv
