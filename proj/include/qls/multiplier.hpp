#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "qls/hamilton.hpp"

namespace qls {

// Zero-homogeneous symbol on phase space, evaluated on demand at (x, xi/|xi|).
struct PhaseSymbol {
    std::string name;
    int d = 2;
    std::function<double(const Vec2& x, const Vec2& xhat)> rule;
    double inner_radius = 0.0;  // declared: vanishes for |x| < inner_radius
    double outer_radius = std::numeric_limits<double>::infinity();  // and for |x| > outer_radius
    bool nonnegative = true;
    std::string support;
    int degree = 0;

    // Any nonzero xi; the direction is normalized before the rule is applied.
    double operator()(const Vec2& x, const Vec2& xi) const;
};

// Polar lattice of phase samples with unit xi (d = 1: xi = +-1).
std::vector<PhasePoint> phase_net(int d, double r_min, double r_max, int radii, int angles, int dirs);
std::vector<PhasePoint> random_phase_net(int d, double r_max, int count, unsigned seed);

struct SymbolCheck {
    std::size_t samples = 0;
    double min = 0.0;
    double max = 0.0;
    bool finite = true;
    std::size_t negative = 0;     // below -1e-14 when declared nonnegative
    std::size_t off_support = 0;  // nonzero outside the declared radii
    bool ok() const { return finite && negative == 0 && off_support == 0; }
};
SymbolCheck check_symbol(const PhaseSymbol& q, const std::vector<PhasePoint>& net);

// Columns: x0 x1 xi0 xi1 value.
void write_symbol_csv(std::ostream& os, const PhaseSymbol& q, const std::vector<PhasePoint>& net);

// Radial shells [R + k w, R + (k + 1) w).
struct MuSequence {
    double R = 0.0;
    double width = 1.0;
    RVec shell_max;  // max of |g - I| + |grad g| + |b| per shell
    RVec raw;        // mu_k before the slowly varying repair
    RVec mu;
    double square_sum = 0.0;
};
// g packed (00, 01, 11), or slot 0 only in 1D; b may hold empty vectors.
MuSequence build_mu(const GridSpec& spec, const std::array<RVec, 3>& g, const std::array<CVec, 2>& b, double R,
                    double width = 1.0);

// rho_R: increasing from 1 at r = R to 2 past the last shell, slope mu_k^2 / sum mu^2 on shell k.
struct RadialWeight {
    double R = 0.0;
    double width = 1.0;
    RVec knots;  // rho at shell edges
    RVec slope;
    double c = 0.0;  // reported constant in rho' >= c mu_k^2
    double operator()(double r) const;
    double deriv(double r) const;
};
RadialWeight build_rho(const MuSequence& mu);

// chi_in: 1 below -1/2, 0 above -1/4, nonincreasing.
double chi_in(double t);
double chi_in_deriv(double t);

// q_in = rho(r) chi_{>5R}(r) chi_in(cos theta - c rho(r)); chi_{>5R} vanishes for r <= 4R.
PhaseSymbol incoming_symbol(double R, const RadialWeight& rho, double c = 1.0 / 16);
// p_in = chi_in(cos theta) chi_{>5R}(r).
PhaseSymbol crude_incoming_symbol(double R);

// chi(x, xi) = chi_{>2R}(|y|) chi_{<-1/2}(cos angle(y, xi)), y = x - 8R xi.
PhaseSymbol chi_fixture(double R);
// Wider version covering the support of the transported symbol.
PhaseSymbol chi_tilde_fixture(double R);

struct TransportOptions {
    double ds = 0.0;            // RK4 step in flow time; 0 -> R / 200
    double clear_factor = 10.0; // stop once chi = 0 and x . xi >= clear_factor R
    double box_factor = 100.0;  // leaving |x| > box_factor R with chi > 0 flags the seed
    double s_cap = 0.0;         // 0 -> 4 box_factor R
};

struct Characteristic {
    double value = 0.0;
    double s_end = 0.0;
    double s_enter = -1.0;  // first time chi > 0 (-1 if never)
    bool flagged = false;
    std::string reason;
};

// q solving -H q = CM q + chi along the cosphere flow, q = 0 once the forward ray clears supp chi:
// q(z) = int_0^inf e^{CM s} chi(Phi_s z) ds.
class TransportSymbol {
public:
    TransportSymbol(std::shared_ptr<const Metric> g, PhaseSymbol chi, double R, double CM, TransportOptions opt = {});
    Characteristic trace(const Vec2& x, const Vec2& xi) const;
    double operator()(const Vec2& x, const Vec2& xi) const { return trace(x, xi).value; }
    PhaseSymbol symbol() const;
    double R() const { return R_; }
    double CM() const { return CM_; }
    double step() const { return opt_.ds; }

private:
    std::shared_ptr<const Metric> g_;
    PhaseSymbol chi_;
    double R_;
    double CM_;
    TransportOptions opt_;
};

// Flat-metric oracle: adaptive Simpson of e^{CM s} chi(x + 2 s xhat, xhat) over the straight line.
double flat_transport_oracle(const PhaseSymbol& chi, const Vec2& x, const Vec2& xi, double CM, double s_end,
                             double tol = 1e-12);

struct CoverCheck {
    std::size_t support_samples = 0;
    double min_cover = 0.0;  // min chi_tilde over samples with q > 0
    bool ok = false;
};

// q_comp = chi_{<75R}(|x|) (q + chi_tilde); vanishes beyond 80R.
struct QComp {
    PhaseSymbol symbol;
    CoverCheck cover;
};
QComp assemble_qcomp(const PhaseSymbol& q, const PhaseSymbol& chi_tilde, double R, const std::vector<PhasePoint>& net,
                     double cover_threshold = 0.25);

struct CommutatorOptions {
    double h = 1e-3;  // finite-difference step; scaled by R for positions
    double tol = 1e-8;
    double R = 1.0;
};

struct CommutatorVerdict {
    std::size_t samples = 0;
    double min_margin = 0.0;  // min of -H_a q - CM q at |xi| = 1
    PhasePoint witness;
    double inner_min = std::numeric_limits<double>::infinity();  // min of -H_a q over |x| < 2R
    bool inner_ok = false;
    double gradient_ratio = 0.0;  // max (|q_x| + |q_xi|) / (-H_a q) where -H_a q > 0
    double sup_q = 0.0;
    double sup_grad = 0.0;
    bool pass = false;
};

// -H_a q at a unit covector by fourth-order central differences.
double minus_hamilton_derivative(const PhaseSymbol& q, const Metric& g, const PhasePoint& p, double hx, double hxi,
                                 double* grad_norm = nullptr);

CommutatorVerdict verify_commutator(const PhaseSymbol& q, const Metric& g, double CM, const std::vector<PhasePoint>& net,
                                    const CommutatorOptions& opt = {});

// log(sup|q| + sup|grad q|) / (M L): the fitted constant in the size bound.
double gronwall_constant(const CommutatorVerdict& v, double M, double L);

}  // namespace qls
