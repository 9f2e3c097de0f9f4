#pragma once

// Refinement of spheroid parameters by minimizing a Tikhonov functional
// under box constraints (coordinate descent with decremental constraints).

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gravinv/bulakh.hpp"
#include "gravinv/detect.hpp"
#include "gravinv/model.hpp"

namespace gravinv {

/// Free parameters of one body, in block order.
enum class Param : std::size_t { eps = 0, rho = 1, x0 = 2, y0 = 3, z0 = 4 };
inline constexpr std::size_t kParamsPerBody = 5;

/// Parameter label within a body block: "eps", "rho", "x0", "y0", "z0".
const char* param_name(Param p);

inline constexpr std::size_t param_index(std::size_t body, Param p) {
  return body * kParamsPerBody + static_cast<std::size_t>(p);
}

/// Per-parameter bounds of m bodies, k = 5 per body. Midpoints and weights
/// q = 1 / mid^2 are derived.
struct ParameterBox {
  std::vector<std::string> names;
  std::vector<double> p_min;
  std::vector<double> p_max;

  static ParameterBox from_bodies(std::span<const BodyBounds> bodies);

  std::size_t size() const noexcept { return p_min.size(); }
  std::size_t bodies() const noexcept { return size() / kParamsPerBody; }
  double mid(std::size_t j) const { return 0.5 * (p_min[j] + p_max[j]); }
  double weight(std::size_t j) const {
    const double m = mid(j);
    return 1.0 / (m * m);
  }
  std::vector<double> midpoint() const;
  std::vector<double> weights() const;
  BodyBounds body(std::size_t k) const;
  bool contains(std::span<const double> params) const;

  /// Throws ValidationError unless bounds are ordered, finite, have a
  /// nonzero midpoint, and physical parameters are positive.
  void validate() const;
};

/// Body masses during one descent round. With reference depths the mass
/// follows the depth as M(z0) = mass (z0 / depth)^2, the peak relation
/// M = z0^2 V_max / gamma at a fixed peak intensity; without them it is
/// constant.
struct MassLaw {
  std::vector<double> mass;
  std::vector<double> depth;

  bool follows_depth() const noexcept { return !depth.empty(); }
  double at(std::size_t body, double z0) const;
  std::vector<double> evaluate(std::span<const double> params) const;
};

/// Raises z0_min so that every spheroid in the box is buried, i.e.
/// eps_max^2 * 3 M(z0) / (4 pi rho_min) < z0^3 for every z0 >= z0_min. When
/// a `current` point is given and the raise would exclude it, eps_max and
/// then rho_min are tightened toward it instead. Throws ValidationError when
/// no buried configuration remains.
void enforce_burial(ParameterBox& box, const MassLaw& law, std::span<const double> current = {});
inline void enforce_burial(ParameterBox& box, std::span<const double> masses,
                           std::span<const double> current = {}) {
  enforce_burial(box, MassLaw{{masses.begin(), masses.end()}, {}}, current);
}

/// Spheroids encoded by params, with a = (M / ((4/3) pi eps rho))^(1/3).
std::vector<Spheroid> spheroids_from(std::span<const double> params, std::span<const double> masses);

/// Sum over measured stations of (observed - modelled)^2, mGal^2.
double misfit(std::span<const double> params, std::span<const double> masses,
              std::span<const Station> stations);

enum class Functional { f1, f2 };

/// alpha * sum q_j (p_j - mid_j)^2 for F1, alpha * sum q_j p_j^2 for F2.
double stabilizer(std::span<const double> params, const ParameterBox& box, Functional kind);

double tikhonov_f1(std::span<const double> params, std::span<const double> masses,
                   std::span<const Station> stations, const ParameterBox& box, double alpha);
double tikhonov_f2(std::span<const double> params, std::span<const double> masses,
                   std::span<const Station> stations, const ParameterBox& box, double alpha);

using Objective = std::function<double(std::span<const double>)>;

struct DescentOptions {
  double tol = 1e-6;
  std::size_t max_sweeps = 200;
  std::size_t line_iterations = 48;
};

/// Objective value at the start and after every sweep, plus whether every
/// iterate stayed inside the box.
struct DescentTrace {
  std::vector<double> values;
  bool feasible = true;
};

/// Cyclic coordinate descent with golden-section line searches on
/// [p_min_j, p_max_j]. A coordinate moves only if the objective does not
/// increase. Stops when a sweep lowers the objective by less than tol
/// relative, or after max_sweeps.
std::vector<double> coordinate_descent(const Objective& objective, const ParameterBox& box,
                                       std::vector<double> start, const DescentOptions& options = {},
                                       DescentTrace* trace = nullptr);

enum class MassUpdate {
  fixed,
  // M follows z0 by the peak relation inside a round and is rescaled to the
  // body's own share of the observed field between rounds.
  peak_relation,
};

struct DecrementalOptions {
  Functional functional = Functional::f1;
  double alpha = 1e-8;
  std::size_t rounds = 10;
  double shrink = 0.7;
  DescentOptions descent;
  double eps_floor = 0.01;
  double rho_floor = 0.01;
  double coordinate_floor = 0.05;
  MassUpdate mass_update = MassUpdate::peak_relation;

  void validate() const;
};

struct InversionResult {
  std::vector<double> params;
  ParameterBox box;  // final round
  std::vector<double> masses;
  std::vector<Spheroid> bodies;
  std::vector<double> volumes;
  double f_initial = 0.0;
  double f_final = 0.0;
  double misfit = 0.0;
  std::size_t rounds = 0;
  double alpha = 0.0;
  Functional functional = Functional::f1;
};

/// Repeats coordinate descent on a narrowing box. After each round every
/// interval is re-centred on the estimate with half-width shrink * previous
/// (never below its floor), clipped to the previous box; a side stays put
/// when the estimate is within 1 % of it. `masses` hold at the start point,
/// which defaults to the box midpoint; under MassUpdate::peak_relation they
/// are first carried from `mass_depths` (default: the start depths) to the
/// start depths by the peak relation.
InversionResult decremental_solve(std::span<const Station> stations, const ParameterBox& initial_box,
                                  std::span<const double> masses,
                                  const DecrementalOptions& options = {},
                                  std::span<const double> start = {},
                                  std::span<const double> mass_depths = {});

/// Rescales each body's mass by the least-squares ratio of the observed
/// intensity, less the other bodies, to its own modelled intensity over all
/// measured stations (the peak relation M = z0^2 V_max / gamma generalized
/// to a fitted model). Ratios are clamped to [0.5, 2] and the result capped
/// so the body stays buried.
std::vector<double> refresh_masses(std::span<const double> params, std::span<const double> masses,
                                   std::span<const Station> stations);

/// sqrt((1/n) sum q_j (p_j - exact_j)^2).
double solution_error(std::span<const double> params, std::span<const double> exact,
                      std::span<const double> weights);

struct PipelineOptions {
  RasterOptions raster;
  double min_separation = 2.0;  // km between distinct maxima
  ResolveOptions resolve;
  // Poles merged by the valley rule are kept when adding them cuts the
  // misfit of the fitted model by at least this factor.
  bool resolve_merged = true;
  double merge_gain = 0.5;
  EstimateOptions estimate;
  // Further fits whose depth/mass estimates are taken at the fitted
  // positions from stations stripped of the other fitted bodies.
  std::size_t reseed_passes = 2;
  double xy_half_width = 1.0;
  double z0_low = 0.6;
  double z0_high = 1.4;
  double eps_min = 0.2, eps_max = 2.2;
  double rho_min = 1.0, rho_max = 3.5;
  DecrementalOptions inversion;

  void validate() const;
};

struct PipelineResult {
  FieldGrid grid;
  std::vector<PeakCandidate> peaks;  // every raw pole with its decision
  std::vector<PeakCandidate> accepted;
  std::vector<DepthMassEstimate> estimates;
  ParameterBox initial_box;
  InversionResult inversion;
  std::vector<std::string> diagnostics;
};

/// Initial box around detected poles and their depth/mass estimates.
ParameterBox initial_box(std::span<const PeakCandidate> peaks,
                         std::span<const DepthMassEstimate> estimates,
                         const PipelineOptions& options = {});

/// Masses and reference depths for the bodies of a given box. Poles are
/// detected on the survey; each body takes the depth/mass estimate of the
/// strongest accepted pole inside its (x0, y0) bounds, or of a pole placed at
/// the box centre when none is.
struct MassSeed {
  std::vector<double> masses;
  std::vector<double> depths;
};
MassSeed seed_masses(std::span<const Station> stations, const ParameterBox& box, double noise_level,
                     const PipelineOptions& options = {});

/// Detection, depth/mass estimation, box construction and decremental
/// inversion. With no detected body the inversion is empty and the
/// diagnostics say why.
PipelineResult refine_pipeline(std::span<const Station> stations, double noise_level,
                               const PipelineOptions& options = {});

}  // namespace gravinv
