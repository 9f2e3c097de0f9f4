#pragma once

// Internal pieces of the spheroid formulas, exposed for tests.

namespace gravinv::detail {

/// Lower bound applied to the prolate ellipsoidal coordinate t.
inline constexpr double kProlateFloor = 1e-300;

/// Oblate ellipsoidal coordinate tau, from q = e a / r and z0 / r.
double oblate_tau(double q, double z0_over_r);

/// Prolate coordinate t, from q = e a / r and the horizontal distance over r.
double prolate_t(double q, double s_over_r);

}  // namespace gravinv::detail
