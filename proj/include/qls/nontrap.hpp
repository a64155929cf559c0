#pragma once

#include <array>
#include <memory>
#include <string>

#include "qls/hamilton.hpp"
#include "qls/model.hpp"

namespace qls {

struct TrapConfig {
    double epsilon = 0.1;        // exterior smallness threshold
    double s0 = 2.6;             // index for M and the exterior norm
    double R_min = 1.0;
    int boundary_points = 64;    // seeds on |x| = 2R
    int directions = 17;         // inward directions per boundary seed (includes the normal)
    int interior_per_axis = 9;   // interior seed lattice over [-2R, 2R]^d
    int interior_directions = 8; // half circle; both time directions are traced
    double kappa = 25.0;         // cap at kappa * 4R
    double C0_coeff = 1.0;       // C0(M) = C0_coeff * (1 + M)^2
    double exit_factor = 2.0;    // escape radius = exit_factor * 2R (clamped to the box)
    FlowOptions flow{};
};

struct TrapReport {
    double M = 0.0;
    double R = 0.0;
    double L = 0.0;
    bool trapped = false;
    double margin = 1.0;
    double C0 = 1.0;
    PhasePoint worst_seed;
    std::size_t seeds = 0;
    std::size_t capped = 0;
    std::size_t failed = 0;
    std::size_t left_grid = 0;
    double mean_step = 0.0;
    double length_cap = 0.0;
};

// l1 H^{s0} norm of chi_{>R/2}(|x|) (g(u0) - I), summed over metric components.
double exterior_norm(const Field& u0, const NonlinearitySpec& nl, double R, double s0);

struct RSearch {
    double R = 0.0;
    bool admissible = false;  // false: no radius inside the box passes
    double norm_at_R = 0.0;
    double norm_below = 0.0;  // at the last rejected radius (0 if none)
    double rejected_R = 0.0;
};
RSearch find_R(const Field& u0, const NonlinearitySpec& nl, const TrapConfig& cfg);

// Metric g(u0) as a grid metric for ray tracing.
std::shared_ptr<GridMetric> metric_from_field(const Field& u0, const NonlinearitySpec& nl, Interp mode = Interp::hermite);

double perturbation_margin(double M, double L, double C0_coeff = 1.0);

// Seeds on the boundary net and the interior lattice, traced in both time directions.
// fixed_step > 0 switches every ray to fixed-step RK4 (dense oracle).
TrapReport compute_L(const Metric& g, double R, const TrapConfig& cfg, double M = 0.0, double fixed_step = 0.0);

// sup|f| + sup|grad f| + sup|grad^2 f| over packed components.
double c2_norm(const GridSpec& spec, const std::array<RVec, 3>& f);

struct StabilityVerdict {
    double c2 = 0.0;
    bool within_guarantee = false;  // c2 <= margin
    TrapReport perturbed;
    double L_ratio = 1.0;
    bool flag_flipped = false;
    bool ok = true;  // L ratio <= 2 and no flip; only asserted when within guarantee
};
StabilityVerdict check_stability(const GridMetric& g, const std::array<RVec, 3>& dg, const TrapReport& base,
                                 const TrapConfig& cfg);

struct EscapeCheck {
    std::size_t seeds = 0;
    std::size_t failures = 0;
    double min_radius = 0.0;  // smallest |x| reached relative to R
};
// Outward seeds with |x0| in [R, 2R]: each must escape without entering B_{R/2}.
EscapeCheck exterior_escape_check(const Metric& g, double R, const TrapConfig& cfg, int radial = 4, int angular = 32,
                                  int dirs = 7);

}  // namespace qls
