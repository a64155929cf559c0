#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "qls/spaces.hpp"
#include "qls/spectral.hpp"

namespace qls {

// Scalar (m = 1) local state at a grid point: u, grad u, grad conj(u).
struct PointState {
    cplx u{};
    std::array<cplx, 2> p{};  // d_j u
    std::array<cplx, 2> q{};  // d_j conj(u)
};

// Packed symmetric matrices: index 0 = (0,0), 1 = (0,1), 2 = (1,1). d = 1 uses slot 0.
inline int packed(int j, int k) { return j == k ? 2 * j : 1; }

struct MetricEval {
    std::array<double, 3> g{1.0, 0.0, 1.0};
    std::array<cplx, 3> du{};   // d g^{jk} / d u
    std::array<cplx, 3> dub{};  // d g^{jk} / d conj(u)
};

struct ForcingEval {
    cplx F{};
    cplx du{}, dub{};
    std::array<cplx, 2> dp{}, dq{};  // d F / d(d_j u), d F / d(d_j conj u)
};

using MetricFn = std::function<MetricEval(const PointState&)>;
using ForcingFn = std::function<ForcingEval(const PointState&)>;

enum class InteractionClass { quadratic, cubic };

// coef * u^a * conj(u)^b * prod_j (d_j u)^{c_j} (d_j conj u)^{e_j}
struct Monomial {
    cplx coef{1.0, 0.0};
    int a = 0, b = 0;
    std::array<int, 2> c{}, e{};
    int degree() const { return a + b + c[0] + c[1] + e[0] + e[1]; }
};

ForcingEval eval_monomials(const std::vector<Monomial>& terms, const PointState& s);
// Parses sums like "u^2 + 0.5*u*ubar_x - 2*u_x*ubar_y"; factors u, ubar, u_x, u_y, ubar_x, ubar_y.
std::vector<Monomial> parse_monomials(const std::string& text);

struct NonlinearitySpec {
    std::string name = "custom";
    int d = 1;
    int m = 1;
    MetricFn metric;
    ForcingFn forcing;
    InteractionClass interaction = InteractionClass::quadratic;
    double c0 = 0.5;
    // Set by the conformal built-in; g = (1 + alpha |u|^2) I.
    bool conformal = false;
    double alpha = 0.0;
    std::vector<Monomial> monomials;

    // Throws std::invalid_argument on a malformed spec (missing callbacks, m != 1,
    // g(0) != I, ellipticity or vanishing order violated on sampled states).
    void validate() const;
};

NonlinearitySpec conformal_spec(int d, double alpha, std::vector<Monomial> F,
                                InteractionClass cls = InteractionClass::quadratic);
// Names: "flat", "conformal", "quadratic" (u^2 + u ubar_x), "grad_sq" (|grad u|^2), "cubic" (|u|^2 u).
NonlinearitySpec builtin_spec(const std::string& name, int d, double alpha = 1.0);

struct MetricField {
    GridSpec spec;
    std::array<RVec, 3> g;
    double min_eig = 0.0;
    double max_eig = 0.0;
    bool elliptic_ok = true;  // min eigenvalue >= c0 / 2 everywhere
    bool conformal = false;   // g^{01} = 0 and g^{00} = g^{11} pointwise
};

struct CoefficientSet {
    GridSpec spec;
    int d = 1;
    MetricField metric;
    std::array<CVec, 2> b, bt;
    CVec c, ct;
    Field source;
    bool finite() const;
};

MetricField metric_of(const Field& u, const NonlinearitySpec& nl);
CoefficientSet linearized_coeffs(const Field& u, const NonlinearitySpec& nl);

// T_a b = sum_{N >= 4} S_{<= N-4} a * S_N b. The low passes of a are cached.
class Paraproduct {
public:
    Paraproduct() = default;
    Paraproduct(const GridSpec& spec, const CVec& a);
    CVec apply(const CVec& b) const;
    // Adjoint in the grid L2 pairing: sum_N S_N(conj(S_{<= N-4} a) f).
    CVec apply_adjoint(const CVec& f) const;
    bool zero() const { return zero_; }

private:
    GridSpec spec_{};
    std::vector<CVec> low_;  // index N - 4
    bool zero_ = true;
};

Field paraproduct(const Field& a, const Field& b);

// P w = 1/2 sum d_j (T_g + T_g^*) d_k w + Delta S_{<=3} w + T_{b^j} d_j w + T_{bt^j} d_j conj(w)
class ParadiffOperator {
public:
    ParadiffOperator() = default;
    explicit ParadiffOperator(const CoefficientSet& cs, bool with_first_order = true);
    CVec apply(const CVec& w) const;
    CVec second_order(const CVec& w) const;
    CVec first_order(const CVec& w) const;
    const GridSpec& spec() const { return spec_; }

private:
    GridSpec spec_{};
    int d_ = 1;
    std::array<Paraproduct, 3> g_;
    std::array<Paraproduct, 2> b_, bt_;
    bool first_ = true;
};

Field paradiff_operator(const CoefficientSet& cs, const Field& w);

// d_j (g^{jk}(u) d_k u) - F(u)
CVec quasilinear_operator(const Field& u, const NonlinearitySpec& nl);
// G = F - d_j(g^{jk} d_k u) + P_u u, so that P_u u - G equals the full quasilinear operator.
Field remainder_G(const Field& u, const NonlinearitySpec& nl);

// w -> w + R conj(w), r = -(1 - psi_{<= l0}) i bt^j xi_j / (2 g^{jk} xi_j xi_k), applied
// as T_{c_j} m_j(D) with c_j = -i bt^j / (2 gamma), m_j = xi_j / |xi|^2 off low frequencies.
// The sign makes (R A + A R) conj(w) cancel T_bt d conj(w) at principal order.
struct ConjugationOp {
    GridSpec spec{};
    int d = 1;
    int ell0 = 0;
    double norm_estimate = 0.0;
    bool trivial = true;
    bool contracting = true;
    std::vector<Paraproduct> coef;
    std::vector<RVec> symbol;

    CVec apply_R(const CVec& v) const;
    CVec apply(const CVec& w) const;  // S w

    struct Inverse {
        CVec w;
        int iterations = 0;
        double last_increment = 0.0;
        bool converged = false;
    };
    Inverse invert(const CVec& v, double tol = 1e-12, int max_iter = 500) const;
};

// Picks the smallest floor l0 whose measured ||R|| is at most target.
ConjugationOp build_conjugation(const CoefficientSet& cs, double target = 0.5);
// Power-iteration estimate of ||R|| on L2.
double conjugation_norm(const ConjugationOp& op, int iterations = 40);

// Size of the d conj(w) coupling before and after conjugation on a test field:
// unconjugated T_bt d conj(w); conjugated is T_bt d conj(w) - R A conj(w) - A R conj(w).
struct CouplingReport {
    double unconjugated = 0.0;
    double conjugated = 0.0;
};
CouplingReport conjugation_coupling(const ConjugationOp& op, const CoefficientSet& cs, const CVec& w);

// Dyadic ratios 2^{ks}||S_k G||_{L2} / c_k against the envelope of u's l1 H^s blocks.
struct GEnvelopeReport {
    RVec blocks_u, blocks_G, envelope, ratio;
    double max_ratio = 0.0;
};
GEnvelopeReport g_envelope_probe(const Field& u, const NonlinearitySpec& nl, double s, double delta = 0.25,
                                 double sigma = 2.0);

}  // namespace qls
