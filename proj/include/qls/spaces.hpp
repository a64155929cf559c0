#pragma once

#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "qls/spectral.hpp"

namespace qls {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ScaleEntry {
    int k = 0;
    double value = 0.0;  // weighted block norm 2^{ks} ||S_k f||
};

struct NormReport {
    std::string name;
    double value = 0.0;
    std::vector<ScaleEntry> per_scale;
};

// Cube-summed L2 norm at scale j: (sum_Q ||chi_Q f||_{L2}^p)^{1/p}; p may be kInf.
double lpj_norm(const Field& f, int j, double p);

// (sum_k 2^{2sk} ||S_k f||^2_{l^p_k L2})^{1/2}
NormReport lp_hs_norm(const Field& f, double s, double p);
NormReport l1_hs_norm(const Field& f, double s);

// f multiplied pointwise by a radial profile of |x|.
Field radial_multiply(const Field& f, const std::function<double(double)>& profile);
SpacetimeField radial_multiply(const SpacetimeField& u, const std::function<double(double)>& profile);

// Spacetime norms. Time integrals use the trapezoid rule on the sample grid.
double linf_l2(const SpacetimeField& u);
double l1_l2(const SpacetimeField& u);
double l2_l2(const SpacetimeField& u);
// sup over dyadic sharp cubes C of side 2^l (l = 0..J, side >= one cell) of 2^{-l/2} ||u||_{L2([0,T] x C)}
double x_norm(const SpacetimeField& u);
double xj_norm(const SpacetimeField& u, int j);
// (sum_k 2^{2ks} ||S_k u||^2_{l^p_k X_k})^{1/2}
NormReport lp_xs_norm(const SpacetimeField& u, double s, double p);
NormReport l1_xs_norm(const SpacetimeField& u, double s);
// Unweighted block norms ||S_k u||_{l^p_k X_k}, k = 0..k_max.
RVec lp_x_blocks(const SpacetimeField& u, double p);

struct YBracket {
    double lower = 0.0;
    double upper = 0.0;
};

// Bracket for ||f||_{Y_j}, Y_j = 2^{j/2} Y + L1 L2.
//   upper: min over time-threshold splits f = f_Y + f_1 of
//          2^{-j/2} min_l 2^{l/2} sum_C ||f_Y||_{L2([0,T] x C)} + ||f_1||_{L1 L2};
//   lower: max over a fixed bank of test fields w of |<f, w>| / ||w||_{X_j}.
YBracket y_surrogate(const SpacetimeField& f, int j);
// (sum_k 2^{2ks} ||S_k f||^2_{l^p_k Y_k})^{1/2} using the upper bracket value.
NormReport lp_ys_norm_upper(const SpacetimeField& f, double s, double p);

// Block norms a_k = 2^{ks} ||S_k f||_{l^p_k L2}.
RVec hs_blocks(const Field& f, double s, double p);

struct Envelope {
    RVec c;
    double delta = 0.25;
    double sigma = 2.0;
};

Envelope make_envelope(const RVec& a, double delta, double sigma);

struct EnvelopeCheck {
    bool dominates = true;       // a_k <= c_k
    bool left_ok = true;         // c_j >= 2^{-delta (k-j)} c_k, j < k
    bool right_ok = true;        // c_j >= 2^{-sigma (j-k)} c_k, j > k
    bool square_sum_ok = true;   // sum c^2 <= bound * sum a^2
    double square_sum_ratio = 0.0;
    double bound = 0.0;
    bool ok() const { return dominates && left_ok && right_ok && square_sum_ok; }
};

// rel_slack absorbs rounding in the powers of two (default a few ulps).
EnvelopeCheck check_envelope(const Envelope& env, const RVec& a, double rel_slack = 1e-14);

enum class EstimateId { u_squared, u_squared_plus, moser, xxy2_plus, xxy1_plus, xxxy_plus, bernstein };

std::string estimate_name(EstimateId id);

struct ProbeSample {
    SpacetimeField u;
    SpacetimeField v;
};

using SampleGenerator = std::function<ProbeSample(std::mt19937_64& rng, double T)>;

struct ProbeConfig {
    double s = 3.5;
    double sigma = 2.0;
    double delta = 0.0;
    std::vector<double> T_values{1.0};
    int trials = 4;
    unsigned seed = 1;
};

struct ProbeResult {
    std::string estimate_id;
    double observed_ratio = 0.0;
    int sample_count = 0;
    int skipped = 0;
    double T_exponent_fit = 0.0;
    std::vector<double> ratio_by_T;  // max ratio (without the T^delta factor) per T value
};

ProbeResult probe_estimate(EstimateId id, const SampleGenerator& gen, const ProbeConfig& cfg);

}  // namespace qls
