#include "qls/cutoff.hpp"

#include <cmath>
#include <numbers>

namespace qls {

namespace {
double bump_tail(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
}  // namespace

double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = bump_tail(t);
    const double b = bump_tail(1.0 - t);
    return a / (a + b);
}

double smooth_step_deriv(double t) {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double a = bump_tail(t);
    const double b = bump_tail(1.0 - t);
    const double da = a / (t * t);
    const double db = -b / ((1.0 - t) * (1.0 - t));
    return (da * b - a * db) / ((a + b) * (a + b));
}

double chi_above(double r, double inner, double outer) {
    if (outer <= inner) return r >= outer ? 1.0 : 0.0;
    return smooth_step((r - inner) / (outer - inner));
}

double chi_below(double t, double one_until, double zero_from) {
    if (zero_from <= one_until) return t <= one_until ? 1.0 : 0.0;
    return 1.0 - smooth_step((t - one_until) / (zero_from - one_until));
}

double lp_profile(double r) {
    if (r <= 1.0) return 1.0;
    if (r >= 2.0) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * std::log2(r)));
}

}  // namespace qls
