#include "qls/model.hpp"

#include <cctype>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "qls/simd.hpp"

namespace qls {

namespace {

cplx ipow(cplx v, int n) {
    cplx r(1.0, 0.0);
    for (int i = 0; i < n; ++i) r *= v;
    return r;
}

CVec deriv(const GridSpec& spec, const CVec& f, int axis) { return spectral_derivative(spec, f, axis); }

CVec conj_vec(const CVec& v) {
    CVec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::conj(v[i]);
    return out;
}

void add_to(CVec& y, const CVec& x, cplx a = 1.0) { simd::active().axpy(a, x.data(), y.data(), y.size()); }

std::vector<PointState> point_states(const Field& u) {
    const auto& spec = u.spec();
    const CVec& v = u.comp();
    std::array<CVec, 2> du;
    for (int j = 0; j < spec.d; ++j) du[j] = deriv(spec, v, j);
    std::vector<PointState> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i].u = v[i];
        for (int j = 0; j < spec.d; ++j) {
            out[i].p[j] = du[j][i];
            out[i].q[j] = std::conj(du[j][i]);
        }
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- nonlinearity

ForcingEval eval_monomials(const std::vector<Monomial>& terms, const PointState& s) {
    ForcingEval r;
    const std::array<cplx, 6> v{s.u, std::conj(s.u), s.p[0], s.p[1], s.q[0], s.q[1]};
    for (const auto& t : terms) {
        const std::array<int, 6> e{t.a, t.b, t.c[0], t.c[1], t.e[0], t.e[1]};
        std::array<cplx, 6> pw, pw1;
        for (int i = 0; i < 6; ++i) {
            pw[i] = ipow(v[i], e[i]);
            pw1[i] = e[i] > 0 ? static_cast<double>(e[i]) * ipow(v[i], e[i] - 1) : cplx(0.0);
        }
        std::array<cplx, 6> partial{};
        cplx val = t.coef;
        for (int i = 0; i < 6; ++i) val *= pw[i];
        for (int i = 0; i < 6; ++i) {
            if (e[i] == 0) continue;
            cplx p = t.coef * pw1[i];
            for (int l = 0; l < 6; ++l)
                if (l != i) p *= pw[l];
            partial[i] = p;
        }
        r.F += val;
        r.du += partial[0];
        r.dub += partial[1];
        r.dp[0] += partial[2];
        r.dp[1] += partial[3];
        r.dq[0] += partial[4];
        r.dq[1] += partial[5];
    }
    return r;
}

std::vector<Monomial> parse_monomials(const std::string& text) {
    std::vector<Monomial> out;
    std::string s;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
    if (s.empty() || s == "0") return out;
    std::size_t pos = 0;
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("monomial '" + text + "': " + why + " at " + std::to_string(pos));
    };
    while (pos < s.size()) {
        double sign = 1.0;
        if (s[pos] == '+' || s[pos] == '-') {
            if (s[pos] == '-') sign = -1.0;
            ++pos;
        } else if (!out.empty()) {
            fail("expected + or -");
        }
        Monomial m;
        m.coef = sign;
        bool first = true;
        while (pos < s.size() && s[pos] != '+' && s[pos] != '-') {
            if (!first) {
                if (s[pos] != '*') fail("expected *");
                ++pos;
            }
            first = false;
            if (std::isdigit(static_cast<unsigned char>(s[pos])) || s[pos] == '.') {
                std::size_t used = 0;
                const double c = std::stod(s.substr(pos), &used);
                // allow exponents written like 1e-3
                pos += used;
                m.coef *= c;
                continue;
            }
            std::size_t end = pos;
            while (end < s.size() && (std::isalpha(static_cast<unsigned char>(s[end])) || s[end] == '_')) ++end;
            const std::string name = s.substr(pos, end - pos);
            pos = end;
            int power = 1;
            if (pos < s.size() && s[pos] == '^') {
                ++pos;
                std::size_t used = 0;
                if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) fail("bad exponent");
                power = std::stoi(s.substr(pos), &used);
                pos += used;
            }
            if (name == "u") m.a += power;
            else if (name == "ubar") m.b += power;
            else if (name == "u_x") m.c[0] += power;
            else if (name == "u_y") m.c[1] += power;
            else if (name == "ubar_x") m.e[0] += power;
            else if (name == "ubar_y") m.e[1] += power;
            else fail("unknown factor '" + name + "'");
        }
        out.push_back(m);
    }
    return out;
}

void NonlinearitySpec::validate() const {
    if (d != 1 && d != 2) throw std::invalid_argument("nonlinearity: d must be 1 or 2");
    if (m != 1) throw std::invalid_argument("nonlinearity: only scalar systems (m = 1) are supported");
    if (!metric || !forcing) throw std::invalid_argument("nonlinearity: metric and forcing callbacks required");
    if (!(c0 > 0.0 && c0 <= 1.0)) throw std::invalid_argument("nonlinearity: c0 must lie in (0, 1]");
    for (const auto& t : monomials) {
        if (d == 1 && (t.c[1] != 0 || t.e[1] != 0)) throw std::invalid_argument("nonlinearity: y-derivative in d = 1");
        const int need = interaction == InteractionClass::quadratic ? 2 : 3;
        if (t.degree() < need) throw std::invalid_argument("nonlinearity: F must vanish to order " + std::to_string(need));
    }
    const MetricEval g0 = metric(PointState{});
    if (std::abs(g0.g[0] - 1.0) > 1e-12 || std::abs(g0.g[1]) > 1e-12 || (d == 2 && std::abs(g0.g[2] - 1.0) > 1e-12))
        throw std::invalid_argument("nonlinearity: g(0) must be the identity");
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> nd(0.0, 0.5);
    for (int i = 0; i < 64; ++i) {
        PointState s;
        s.u = {nd(rng), nd(rng)};
        const MetricEval e = metric(s);
        const double a = e.g[0], c = d == 2 ? e.g[2] : a, b = d == 2 ? e.g[1] : 0.0;
        const double tr = 0.5 * (a + c), disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        if (tr - disc < c0) throw std::invalid_argument("nonlinearity: ellipticity constant c0 violated on sampled states");
    }
}

NonlinearitySpec conformal_spec(int d, double alpha, std::vector<Monomial> F, InteractionClass cls) {
    NonlinearitySpec nl;
    nl.name = "conformal";
    nl.d = d;
    nl.conformal = true;
    nl.alpha = alpha;
    nl.interaction = cls;
    nl.c0 = alpha >= 0.0 ? 1.0 : 0.5;
    nl.monomials = F;
    nl.metric = [alpha, d](const PointState& s) {
        MetricEval e;
        const double gam = 1.0 + alpha * std::norm(s.u);
        e.g = {gam, 0.0, d == 2 ? gam : 1.0};
        // d|u|^2/du = conj(u), d|u|^2/dconj(u) = u
        e.du = {alpha * std::conj(s.u), 0.0, d == 2 ? alpha * std::conj(s.u) : cplx(0.0)};
        e.dub = {alpha * s.u, 0.0, d == 2 ? alpha * s.u : cplx(0.0)};
        return e;
    };
    nl.forcing = [F](const PointState& s) { return eval_monomials(F, s); };
    return nl;
}

NonlinearitySpec builtin_spec(const std::string& name, int d, double alpha) {
    if (name == "flat") {
        auto nl = conformal_spec(d, 0.0, {});
        nl.name = name;
        return nl;
    }
    if (name == "conformal") return conformal_spec(d, alpha, {});
    if (name == "quadratic") {
        auto nl = conformal_spec(d, alpha, parse_monomials("u^2 + u*ubar_x"));
        nl.name = name;
        return nl;
    }
    if (name == "grad_sq") {
        auto nl = conformal_spec(d, 0.0, parse_monomials(d == 2 ? "u_x*ubar_x + u_y*ubar_y" : "u_x*ubar_x"));
        nl.name = name;
        return nl;
    }
    if (name == "cubic") {
        auto nl = conformal_spec(d, alpha, parse_monomials("u^2*ubar"), InteractionClass::cubic);
        nl.name = name;
        return nl;
    }
    throw std::invalid_argument("unknown built-in nonlinearity '" + name + "'");
}

// ---------------------------------------------------------------- coefficients

MetricField metric_of(const Field& u, const NonlinearitySpec& nl) {
    if (!u.finite()) throw std::invalid_argument("metric_of: non-finite field");
    if (u.spec().d != nl.d) throw std::invalid_argument("metric_of: dimension mismatch");
    MetricField mf;
    mf.spec = u.spec();
    const std::size_t N = u.spec().size();
    for (auto& g : mf.g) g.assign(N, 0.0);
    const CVec& v = u.comp();
    mf.min_eig = kInf;
    mf.max_eig = 0.0;
    mf.conformal = true;
    for (std::size_t i = 0; i < N; ++i) {
        PointState s;
        s.u = v[i];
        const MetricEval e = nl.metric(s);
        double a = e.g[0], b = 0.0, c = a;
        if (nl.d == 2) {
            b = e.g[1];
            c = e.g[2];
        }
        mf.g[0][i] = a;
        mf.g[1][i] = b;
        mf.g[2][i] = c;
        const double tr = 0.5 * (a + c), disc = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
        mf.min_eig = std::min(mf.min_eig, nl.d == 2 ? tr - disc : a);
        mf.max_eig = std::max(mf.max_eig, nl.d == 2 ? tr + disc : a);
        if (nl.d == 2 && (std::abs(b) > 1e-14 * std::abs(a) || std::abs(a - c) > 1e-14 * std::abs(a))) mf.conformal = false;
    }
    mf.elliptic_ok = mf.min_eig >= 0.5 * nl.c0;
    return mf;
}

bool CoefficientSet::finite() const {
    auto ok = [](const CVec& v) {
        for (auto x : v)
            if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
        return true;
    };
    for (int j = 0; j < d; ++j)
        if (!ok(b[j]) || !ok(bt[j])) return false;
    for (int q = 0; q < 3; ++q)
        for (double x : metric.g[q])
            if (!std::isfinite(x)) return false;
    return ok(c) && ok(ct);
}

CoefficientSet linearized_coeffs(const Field& u, const NonlinearitySpec& nl) {
    if (u.m() != 1) throw std::invalid_argument("linearized_coeffs: scalar fields only");
    const auto& spec = u.spec();
    CoefficientSet cs;
    cs.spec = spec;
    cs.d = spec.d;
    cs.source = u;
    cs.metric = metric_of(u, nl);
    const std::size_t N = spec.size();
    const auto states = point_states(u);
    const int d = spec.d;
    std::array<std::array<CVec, 3>, 2> dg;  // [u or ubar][packed]
    for (auto& row : dg)
        for (auto& v : row) v.assign(N, 0.0);
    std::vector<ForcingEval> fe(N);
    for (std::size_t i = 0; i < N; ++i) {
        const MetricEval e = nl.metric(states[i]);
        for (int q = 0; q < 3; ++q) {
            dg[0][q][i] = e.du[q];
            dg[1][q][i] = e.dub[q];
        }
        fe[i] = nl.forcing(states[i]);
    }
    for (int j = 0; j < d; ++j) {
        cs.b[j].assign(N, 0.0);
        cs.bt[j].assign(N, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            cplx sb = -fe[i].dp[j], sbt = -fe[i].dq[j];
            for (int k = 0; k < d; ++k) {
                sb += dg[0][packed(j, k)][i] * states[i].p[k];
                sbt += dg[1][packed(j, k)][i] * states[i].p[k];
            }
            cs.b[j][i] = sb;
            cs.bt[j][i] = sbt;
        }
    }
    cs.c.assign(N, 0.0);
    cs.ct.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        cs.c[i] = -fe[i].du;
        cs.ct[i] = -fe[i].dub;
    }
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            const CVec djg = deriv(spec, dg[0][packed(j, k)], j);
            const CVec djgb = deriv(spec, dg[1][packed(j, k)], j);
            for (std::size_t i = 0; i < N; ++i) {
                cs.c[i] += djg[i] * states[i].p[k];
                cs.ct[i] += djgb[i] * states[i].p[k];
            }
        }
    return cs;
}

// ---------------------------------------------------------------- paraproducts

Paraproduct::Paraproduct(const GridSpec& spec, const CVec& a) : spec_(spec) {
    const auto& tab = spectral_tables(spec);
    const int kmax = spec.k_max();
    const std::size_t N = spec.size();
    if (a.size() != N) throw std::invalid_argument("paraproduct: size mismatch");
    zero_ = true;
    for (auto v : a)
        if (v != cplx(0.0)) {
            zero_ = false;
            break;
        }
    if (zero_ || kmax < 4) return;
    const CVec ahat = fft::forward(spec, a);
    RVec low(N, 0.0);
    CVec tmp(N);
    for (int n = 4; n <= kmax; ++n) {
        const RVec& add = tab.band[n - 4];
        for (std::size_t i = 0; i < N; ++i) low[i] += add[i];
        simd::active().rmul(low.data(), ahat.data(), tmp.data(), N);
        fft::inverse(spec, tmp.data(), tmp.data());
        low_.push_back(tmp);
    }
}

CVec Paraproduct::apply(const CVec& b) const {
    const std::size_t N = spec_.size();
    CVec out(b.size(), 0.0);
    if (zero_ || low_.empty()) return out;
    const auto& tab = spectral_tables(spec_);
    const CVec bhat = fft::forward(spec_, b);
    CVec tmp(N);
    for (std::size_t q = 0; q < low_.size(); ++q) {
        simd::active().rmul(tab.band[q + 4].data(), bhat.data(), tmp.data(), N);
        fft::inverse(spec_, tmp.data(), tmp.data());
        simd::active().cmul(low_[q].data(), tmp.data(), tmp.data(), N);
        add_to(out, tmp);
    }
    return out;
}

CVec Paraproduct::apply_adjoint(const CVec& f) const {
    const std::size_t N = spec_.size();
    CVec out(f.size(), 0.0);
    if (zero_ || low_.empty()) return out;
    const auto& tab = spectral_tables(spec_);
    CVec acc(N, 0.0), tmp(N);
    for (std::size_t q = 0; q < low_.size(); ++q) {
        for (std::size_t i = 0; i < N; ++i) tmp[i] = std::conj(low_[q][i]) * f[i];
        fft::forward(spec_, tmp.data(), tmp.data());
        const RVec& band = tab.band[q + 4];
        for (std::size_t i = 0; i < N; ++i) acc[i] += band[i] * tmp[i];
    }
    fft::inverse(spec_, acc.data(), out.data());
    return out;
}

Field paraproduct(const Field& a, const Field& b) {
    if (a.spec() != b.spec()) throw std::invalid_argument("paraproduct: grid mismatch");
    Field out(b.spec(), b.m());
    for (int c = 0; c < b.m(); ++c) out.comp(c) = Paraproduct(a.spec(), a.comp(std::min(c, a.m() - 1))).apply(b.comp(c));
    return out;
}

// ---------------------------------------------------------------- paradifferential operator

ParadiffOperator::ParadiffOperator(const CoefficientSet& cs, bool with_first_order)
    : spec_(cs.spec), d_(cs.d), first_(with_first_order) {
    for (int q = 0; q < (d_ == 2 ? 3 : 1); ++q) {
        const RVec& g = cs.metric.g[q];
        g_[q] = Paraproduct(spec_, CVec(g.begin(), g.end()));
    }
    if (first_)
        for (int j = 0; j < d_; ++j) {
            b_[j] = Paraproduct(spec_, cs.b[j]);
            bt_[j] = Paraproduct(spec_, cs.bt[j]);
        }
}

CVec ParadiffOperator::second_order(const CVec& w) const {
    const std::size_t N = spec_.size();
    const auto& tab = spectral_tables(spec_);
    const int kmax = spec_.k_max();
    // exact Laplacian on bands 0..3
    CVec hat = fft::forward(spec_, w);
    for (std::size_t i = 0; i < N; ++i) {
        double low = 0.0;
        for (int k = 0; k <= std::min(3, kmax); ++k) low += tab.band[k][i];
        hat[i] *= low * tab.laplacian[i];
    }
    CVec out = fft::inverse(spec_, hat);
    std::array<CVec, 2> dw;
    for (int k = 0; k < d_; ++k) dw[k] = deriv(spec_, w, k);
    for (int j = 0; j < d_; ++j) {
        CVec flux(N, 0.0);
        for (int k = 0; k < d_; ++k) {
            const Paraproduct& p = g_[packed(j, k)];
            if (p.zero()) continue;
            add_to(flux, p.apply(dw[k]), 0.5);
            add_to(flux, p.apply_adjoint(dw[k]), 0.5);
        }
        add_to(out, deriv(spec_, flux, j));
    }
    return out;
}

CVec ParadiffOperator::first_order(const CVec& w) const {
    CVec out(w.size(), 0.0);
    if (!first_) return out;
    const CVec wb = conj_vec(w);
    for (int j = 0; j < d_; ++j) {
        if (!b_[j].zero()) add_to(out, b_[j].apply(deriv(spec_, w, j)));
        if (!bt_[j].zero()) add_to(out, bt_[j].apply(deriv(spec_, wb, j)));
    }
    return out;
}

CVec ParadiffOperator::apply(const CVec& w) const {
    CVec out = second_order(w);
    if (first_) add_to(out, first_order(w));
    return out;
}

Field paradiff_operator(const CoefficientSet& cs, const Field& w) {
    if (cs.spec != w.spec()) throw std::invalid_argument("paradiff_operator: grid mismatch");
    Field out(w.spec());
    out.comp() = ParadiffOperator(cs).apply(w.comp());
    return out;
}

CVec quasilinear_operator(const Field& u, const NonlinearitySpec& nl) {
    const auto& spec = u.spec();
    const std::size_t N = spec.size();
    const auto states = point_states(u);
    std::array<RVec, 3> g;
    for (auto& v : g) v.assign(N, 0.0);
    CVec out(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const MetricEval e = nl.metric(states[i]);
        for (int q = 0; q < 3; ++q) g[q][i] = e.g[q];
        out[i] = -nl.forcing(states[i]).F;
    }
    for (int j = 0; j < spec.d; ++j) {
        CVec flux(N, 0.0);
        for (int k = 0; k < spec.d; ++k) {
            const RVec& gjk = g[packed(j, k)];
            for (std::size_t i = 0; i < N; ++i) flux[i] += gjk[i] * states[i].p[k];
        }
        add_to(out, deriv(spec, flux, j));
    }
    return out;
}

Field remainder_G(const Field& u, const NonlinearitySpec& nl) {
    const CoefficientSet cs = linearized_coeffs(u, nl);
    CVec pu = ParadiffOperator(cs).apply(u.comp());
    add_to(pu, quasilinear_operator(u, nl), -1.0);
    Field out(u.spec());
    out.comp() = std::move(pu);
    return out;
}

// ---------------------------------------------------------------- conjugation

namespace {

ConjugationOp make_conjugation(const CoefficientSet& cs, int ell0) {
    ConjugationOp op;
    op.spec = cs.spec;
    op.d = cs.d;
    op.ell0 = ell0;
    const std::size_t N = cs.spec.size();
    op.trivial = true;
    for (int j = 0; j < cs.d; ++j)
        for (auto v : cs.bt[j])
            if (v != cplx(0.0)) op.trivial = false;
    if (op.trivial) return op;
    if (cs.d == 2 && !cs.metric.conformal)
        throw std::invalid_argument("conjugation: only conformal metrics are supported in d = 2");
    const auto& tab = spectral_tables(cs.spec);
    const int kmax = cs.spec.k_max();
    for (int j = 0; j < cs.d; ++j) {
        CVec c(N);
        for (std::size_t i = 0; i < N; ++i) c[i] = cplx(0.0, -1.0) * cs.bt[j][i] / (2.0 * cs.metric.g[0][i]);
        op.coef.emplace_back(cs.spec, c);
        RVec m(N, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            const double r2 = -tab.laplacian[i];
            if (r2 == 0.0) continue;
            const double cut = 1.0 - lp_range_symbol(0, ell0, tab.nu[i], kmax);
            m[i] = cut * tab.xi_odd[j][i] / r2;
        }
        op.symbol.push_back(std::move(m));
    }
    return op;
}

CVec apply_symbol(const GridSpec& spec, const RVec& m, const CVec& v) {
    CVec hat = fft::forward(spec, v);
    simd::active().rmul(m.data(), hat.data(), hat.data(), hat.size());
    return fft::inverse(spec, hat);
}

}  // namespace

CVec ConjugationOp::apply_R(const CVec& v) const {
    CVec out(v.size(), 0.0);
    if (trivial) return out;
    for (int j = 0; j < d; ++j) add_to(out, coef[j].apply(apply_symbol(spec, symbol[j], v)));
    return out;
}

CVec ConjugationOp::apply(const CVec& w) const {
    CVec out = w;
    if (!trivial) add_to(out, apply_R(conj_vec(w)));
    return out;
}

ConjugationOp::Inverse ConjugationOp::invert(const CVec& v, double tol, int max_iter) const {
    Inverse r;
    r.w = v;
    if (trivial) {
        r.converged = true;
        return r;
    }
    const double scale = std::max(1e-300, std::sqrt(simd::active().norm2(v.data(), v.size())));
    for (int it = 1; it <= max_iter; ++it) {
        CVec next = v;
        add_to(next, apply_R(conj_vec(r.w)), -1.0);
        double inc = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) inc += std::norm(next[i] - r.w[i]);
        r.w = std::move(next);
        r.iterations = it;
        r.last_increment = std::sqrt(inc) / scale;
        if (r.last_increment < tol) {
            r.converged = true;
            break;
        }
        if (!std::isfinite(r.last_increment)) break;
    }
    return r;
}

double conjugation_norm(const ConjugationOp& op, int iterations) {
    if (op.trivial) return 0.0;
    const std::size_t N = op.spec.size();
    std::mt19937_64 rng(99);
    std::normal_distribution<double> nd;
    CVec v(N);
    for (auto& x : v) x = {nd(rng), nd(rng)};
    auto normalize = [](CVec& x) {
        const double n = std::sqrt(simd::active().norm2(x.data(), x.size()));
        if (n > 0.0)
            for (auto& y : x) y /= n;
        return n;
    };
    normalize(v);
    double est = 0.0;
    for (int it = 0; it < iterations; ++it) {
        CVec rv = op.apply_R(v);
        est = std::sqrt(simd::active().norm2(rv.data(), N));
        // R^* = sum_j m_j(D) T_{c_j}^*
        CVec back(N, 0.0);
        for (int j = 0; j < op.d; ++j) add_to(back, apply_symbol(op.spec, op.symbol[j], op.coef[j].apply_adjoint(rv)));
        if (normalize(back) == 0.0) return 0.0;
        v = std::move(back);
    }
    return est;
}

ConjugationOp build_conjugation(const CoefficientSet& cs, double target) {
    const int kmax = cs.spec.k_max();
    ConjugationOp best;
    for (int ell0 = 0; ell0 <= kmax; ++ell0) {
        ConjugationOp op = make_conjugation(cs, ell0);
        if (op.trivial) return op;
        op.norm_estimate = conjugation_norm(op);
        op.contracting = op.norm_estimate <= target;
        if (op.contracting) return op;
        best = std::move(op);
    }
    return best;
}

CouplingReport conjugation_coupling(const ConjugationOp& op, const CoefficientSet& cs, const CVec& w) {
    const GridSpec& spec = cs.spec;
    const CVec wb = conj_vec(w);
    CVec coupling(w.size(), 0.0);
    for (int j = 0; j < cs.d; ++j) add_to(coupling, Paraproduct(spec, cs.bt[j]).apply(deriv(spec, wb, j)));
    CouplingReport r;
    r.unconjugated = std::sqrt(simd::active().norm2(coupling.data(), coupling.size()) * spec.cell_volume());
    if (!op.trivial) {
        const ParadiffOperator A(cs, false);
        add_to(coupling, op.apply_R(A.apply(wb)), -1.0);
        add_to(coupling, A.apply(op.apply_R(wb)), -1.0);
    }
    r.conjugated = std::sqrt(simd::active().norm2(coupling.data(), coupling.size()) * spec.cell_volume());
    return r;
}

GEnvelopeReport g_envelope_probe(const Field& u, const NonlinearitySpec& nl, double s, double delta, double sigma) {
    GEnvelopeReport r;
    r.blocks_u = hs_blocks(u, s, 1.0);
    r.blocks_G = hs_blocks(remainder_G(u, nl), s, 1.0);
    r.envelope = make_envelope(r.blocks_u, delta, sigma).c;
    r.ratio.assign(r.envelope.size(), 0.0);
    for (std::size_t k = 0; k < r.envelope.size(); ++k) {
        r.ratio[k] = r.envelope[k] > 0.0 ? r.blocks_G[k] / r.envelope[k] : 0.0;
        r.max_ratio = std::max(r.max_ratio, r.ratio[k]);
    }
    return r;
}

}  // namespace qls
