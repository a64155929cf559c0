#pragma once

namespace qls {

// C-infinity transition: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t);
double smooth_step_deriv(double t);

// Exterior cutoff chi_{>a}: 0 for r <= inner, 1 for r >= outer.
double chi_above(double r, double inner, double outer);

// Interior cutoff chi_{<b}: 1 for t <= one_until, 0 for t >= zero_from.
double chi_below(double t, double one_until, double zero_from);

// Radial exterior cutoff used for R: chi_{>a}(r) vanishes for r <= a/2.
inline double chi_exterior(double r, double a) { return chi_above(r, 0.5 * a, a); }

// Raised-cosine dyadic profile: 1 for r <= 1, 0 for r >= 2, cosine in log2 r.
double lp_profile(double r);

}  // namespace qls
