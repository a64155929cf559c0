#pragma once

#include <string>
#include <vector>

#include "qls/model.hpp"
#include "qls/nontrap.hpp"

namespace qls {

struct SolverConfig {
    double T = 0.05;
    double dt = 2.5e-3;
    double s = 3.61;
    double s0 = 2.6;
    int n_max = 12;
    double tol = 1e-8;  // on ||u^{(n+1)} - u^{(n)}||_{l^p X^0}
    double p = 1.0;     // cube summation; 2 for cubic-class runs
    // T <= exp(-C(M) L) / K(M_s), C(M) = C_coeff (1 + M)^2, K(M_s) = 1 + K_coeff M_s^2
    double C_coeff = 1.0;
    double K_coeff = 1.0;
    double inner_tol = 1e-12;
    int gmres_restart = 40;
    int gmres_max_iter = 400;
    bool check_trapping = true;
    double R = 1.0;  // exterior region |x| > R for the uniform bounds
    TrapConfig trap{};

    int steps() const;
    // Throws std::invalid_argument unless 0 < dt <= T, p in {1, 2} and
    // d/2 + 2 < s0 < s (quadratic) or (d + 3)/2 < s, s0 < s (cubic).
    void validate(int d, InteractionClass cls = InteractionClass::quadratic) const;
};

// min(T_user, exp(-C(M) L) / K(M_s)); zero data returns T_user.
double lifespan_bound(double M, double M_s, double L, const SolverConfig& cfg, double T_user);

struct LinearStep {
    CVec w;
    int iterations = 0;
    double residual = 0.0;  // relative, of the preconditioned midpoint system
    bool converged = false;
};

// Implicit midpoint for i w_t + P w = f, P the paradifferential operator of cs
// (second order plus T_b d w + T_bt d conj(w)); f is taken at the midpoint.
LinearStep linear_step(const CoefficientSet& cs, const CVec& w, const CVec& f_mid, double dt,
                       const SolverConfig& cfg = {});

struct LinearRun {
    SpacetimeField w;
    RVec energy;  // ||w(t_i)||_{L2}
    std::vector<int> iterations;
    double worst_residual = 0.0;
    bool flagged = false;
};

// Coefficients from the midpoint average of u_ref slices; u_ref and f share the time grid.
LinearRun solve_linear(const SpacetimeField& u_ref, const Field& w0, const SpacetimeField& f,
                       const NonlinearitySpec& nl, const SolverConfig& cfg);

struct IterationTrace {
    RVec norm_s, norm_s0, exterior_s0;  // per iterate u^{(n)}, n >= 1
    RVec diff;                          // ||u^{(n)} - u^{(n-1)}||_{l^p X^0}
    RVec diff_sigma;                    // same in l^p X^{sigma}, sigma = s0 - 1.01
    std::vector<TrapReport> traps;
    std::vector<int> gmres_iterations;
    double M = 0.0, M_s = 0.0;          // data norms l^p H^{s0}, l^p H^s
};

struct Solution {
    SpacetimeField u;
    IterationTrace trace;
    bool converged = false;
    bool diverged = false;
    bool flagged = false;
    std::string note;
};

// u^{(0)} = 0; u^{(n+1)} solves the linear flow with coefficients and G from u^{(n)}.
Solution iterate(const Field& u0, const NonlinearitySpec& nl, const SolverConfig& cfg);

// Contraction ratios diff[n] / diff[n-1] for iterate indices in [first, last] (1-based n).
RVec contraction_ratios(const IterationTrace& tr, int first = 3, int last = 8);

// Pseudo-spectral integration of i u_t + d_j(g^{jk} d_k u) = F with integrating-factor RK4.
SpacetimeField direct_integrate(const Field& u0, const NonlinearitySpec& nl, double T, int steps, int substeps = 4);

struct EnvelopeTrace {
    RVec data_blocks;       // ||S_k u0||_{l^p H^s}
    RVec envelope;          // c_k
    RVec solution_blocks;   // 2^{ks} ||S_k u||_{l^p X_k}
    RVec ratio;
    double max_ratio = 0.0;
    std::vector<RVec> band_l2;  // [time][k] ||S_k u(t)||_{L2}
};
EnvelopeTrace envelope_trace(const Solution& sol, const SolverConfig& cfg, double delta = 0.25, double sigma = 2.0);

struct DependenceRow {
    double scale = 0.0;
    double sigma = 0.0;
    double diff = 0.0;
    double data_diff = 0.0;
    double ratio = 0.0;
    bool included = true;
};
struct DependenceTable {
    std::vector<DependenceRow> rows;
    std::vector<double> excluded;  // scales whose run did not converge or had zero data difference
};
// Runs u0 + scale * profile for each scale and compares against the run from u0.
DependenceTable continuous_dependence(const Field& u0, const Field& profile, const std::vector<double>& scales,
                                      const NonlinearitySpec& nl, const SolverConfig& cfg);

struct LocalEnergyReport {
    double x0 = 0.0;              // ||u||_{l^2 X^0}
    double incoming = 0.0;        // same for the p_in-localized part
    double compact = 0.0;         // ||chi_{<R} u||_{L2 H^{1/2}}
    double data = 0.0;            // ||u0||_{L2}
    double forcing = 0.0;         // Y upper value of G(u)
    double x0_ratio = 0.0;
    double compact_ratio = 0.0;   // compact / (incoming + data + forcing)
};
LocalEnergyReport local_energy_report(const Solution& sol, const NonlinearitySpec& nl, double R);

// Phase-space localization to p_in = chi_in(cos theta) chi_{>5R}(|x|) through angular frequency sectors.
Field incoming_part(const Field& u, double R, int sectors = 16);

}  // namespace qls
