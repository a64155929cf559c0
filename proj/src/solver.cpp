#include "qls/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "qls/cutoff.hpp"
#include "qls/multiplier.hpp"

namespace qls {

namespace {

const cplx I(0.0, 1.0);

double rdot(const CVec& a, const CVec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s;
}

double rnorm(const CVec& a) { return std::sqrt(rdot(a, a)); }

void axpy(CVec& y, double a, const CVec& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

struct GmresResult {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

// Restarted GMRES over the reals for a real-linear map on C^N, right preconditioned.
template <class Op, class Prec>
GmresResult gmres(const Op& A, const Prec& Minv, const CVec& b, CVec& x, double tol, int restart, int max_iter) {
    GmresResult res;
    const double bnorm = rnorm(b);
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), cplx(0.0));
        res.converged = true;
        return res;
    }
    const std::size_t N = b.size();
    while (res.iterations < max_iter) {
        CVec r = A(x);
        for (std::size_t i = 0; i < N; ++i) r[i] = b[i] - r[i];
        const double beta = rnorm(r);
        res.residual = beta / bnorm;
        if (res.residual <= tol) {
            res.converged = true;
            return res;
        }
        const int m = restart;
        std::vector<CVec> V;
        V.reserve(m + 1);
        for (auto& v : r) v /= beta;
        V.push_back(std::move(r));
        std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
        std::vector<double> cs(m), sn(m), g(m + 1, 0.0);
        g[0] = beta;
        int k = 0;
        for (; k < m && res.iterations < max_iter; ++k) {
            ++res.iterations;
            CVec w = A(Minv(V[k]));
            for (int j = 0; j <= k; ++j) {
                H[j][k] = rdot(V[j], w);
                axpy(w, -H[j][k], V[j]);
            }
            H[k + 1][k] = rnorm(w);
            for (int j = 0; j < k; ++j) {
                const double t = cs[j] * H[j][k] + sn[j] * H[j + 1][k];
                H[j + 1][k] = -sn[j] * H[j][k] + cs[j] * H[j + 1][k];
                H[j][k] = t;
            }
            const double den = std::hypot(H[k][k], H[k + 1][k]);
            cs[k] = den > 0 ? H[k][k] / den : 1.0;
            sn[k] = den > 0 ? H[k + 1][k] / den : 0.0;
            const double hk1 = H[k + 1][k];
            H[k][k] = den;
            H[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            res.residual = std::abs(g[k + 1]) / bnorm;
            if (res.residual <= tol || hk1 == 0.0) {
                ++k;
                break;
            }
            for (auto& v : w) v /= hk1;
            V.push_back(std::move(w));
        }
        std::vector<double> y(k, 0.0);
        for (int i = k - 1; i >= 0; --i) {
            double s = g[i];
            for (int j = i + 1; j < k; ++j) s -= H[i][j] * y[j];
            y[i] = s / H[i][i];
        }
        CVec z(N, 0.0);
        for (int j = 0; j < k; ++j) axpy(z, y[j], V[j]);
        const CVec mz = Minv(z);
        for (std::size_t i = 0; i < N; ++i) x[i] += mz[i];
        if (res.residual <= tol) {
            CVec rr = A(x);
            for (std::size_t i = 0; i < N; ++i) rr[i] = b[i] - rr[i];
            res.residual = rnorm(rr) / bnorm;
            if (res.residual <= 10 * tol) {
                res.converged = true;
                return res;
            }
        }
    }
    return res;
}

SpacetimeField difference(const SpacetimeField& a, const SpacetimeField& b) {
    std::vector<Field> s;
    s.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) s.push_back(a.slice(i) - b.slice(i));
    return SpacetimeField(a.times(), std::move(s));
}

Field midpoint(const Field& a, const Field& b) {
    Field m = a + b;
    m *= 0.5;
    return m;
}

double lp_xs(const SpacetimeField& u, double s, double p) { return lp_xs_norm(u, s, p).value; }

}  // namespace

int SolverConfig::steps() const { return std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9))); }

void SolverConfig::validate(int d, InteractionClass cls) const {
    if (!(T > 0.0) || !(dt > 0.0) || dt > T) throw std::invalid_argument("solver: need 0 < dt <= T");
    if (p != 1.0 && p != 2.0) throw std::invalid_argument("solver: cube summation p must be 1 or 2");
    if (!(s > s0)) throw std::invalid_argument("solver: need s > s0");
    if (cls == InteractionClass::quadratic && !(s0 > 0.5 * d + 2))
        throw std::invalid_argument("solver: quadratic class needs s0 > d/2 + 2");
    if (cls == InteractionClass::cubic && !(s > 0.5 * (d + 3)))
        throw std::invalid_argument("solver: cubic class needs s > (d + 3)/2");
    if (n_max < 1) throw std::invalid_argument("solver: n_max must be positive");
    if (!(tol > 0.0) || !(inner_tol > 0.0)) throw std::invalid_argument("solver: tolerances must be positive");
}

double lifespan_bound(double M, double M_s, double L, const SolverConfig& cfg, double T_user) {
    if (M == 0.0 && M_s == 0.0) return T_user;
    const double C = cfg.C_coeff * (1.0 + M) * (1.0 + M);
    const double K = 1.0 + cfg.K_coeff * M_s * M_s;
    return std::min(T_user, std::exp(-C * L) / K);
}

LinearStep linear_step(const CoefficientSet& cs, const CVec& w, const CVec& f_mid, double dt, const SolverConfig& cfg) {
    const GridSpec& spec = cs.spec;
    const std::size_t N = spec.size();
    if (w.size() != N || f_mid.size() != N) throw std::invalid_argument("linear_step: size mismatch");
    const ParadiffOperator P(cs, true);
    const auto& tab = spectral_tables(spec);
    const cplx half = 0.5 * dt * I;
    auto A = [&](const CVec& v) {
        CVec out = P.apply(v);
        for (std::size_t i = 0; i < N; ++i) out[i] = v[i] - half * out[i];
        return out;
    };
    auto Minv = [&](const CVec& v) {
        CVec h = fft::forward(spec, v);
        for (std::size_t i = 0; i < N; ++i) h[i] /= 1.0 - half * tab.laplacian[i];
        return fft::inverse(spec, h);
    };
    CVec rhs(N);
    for (std::size_t i = 0; i < N; ++i) rhs[i] = w[i] - half * f_mid[i];
    CVec v = Minv(rhs);
    const GmresResult r = gmres(A, Minv, rhs, v, cfg.inner_tol, cfg.gmres_restart, cfg.gmres_max_iter);
    LinearStep out;
    out.iterations = r.iterations;
    out.residual = r.residual;
    out.converged = r.converged;
    out.w.resize(N);
    for (std::size_t i = 0; i < N; ++i) out.w[i] = 2.0 * v[i] - w[i];
    return out;
}

LinearRun solve_linear(const SpacetimeField& u_ref, const Field& w0, const SpacetimeField& f, const NonlinearitySpec& nl,
                       const SolverConfig& cfg) {
    if (u_ref.size() < 2 || f.size() != u_ref.size()) throw std::invalid_argument("solve_linear: time grids differ");
    LinearRun run;
    const auto& t = u_ref.times();
    std::vector<Field> slices;
    slices.reserve(t.size());
    slices.push_back(w0);
    run.energy.push_back(w0.l2());
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const CoefficientSet cs = linearized_coeffs(midpoint(u_ref.slice(i), u_ref.slice(i + 1)), nl);
        const Field fm = midpoint(f.slice(i), f.slice(i + 1));
        const LinearStep st = linear_step(cs, slices.back().comp(), fm.comp(), t[i + 1] - t[i], cfg);
        run.iterations.push_back(st.iterations);
        run.worst_residual = std::max(run.worst_residual, st.residual);
        if (!st.converged) run.flagged = true;
        Field next(w0.spec());
        next.comp() = st.w;
        run.energy.push_back(next.l2());
        slices.push_back(std::move(next));
    }
    run.w = SpacetimeField(t, std::move(slices));
    return run;
}

Solution iterate(const Field& u0, const NonlinearitySpec& nl, const SolverConfig& cfg) {
    const GridSpec& spec = u0.spec();
    cfg.validate(spec.d, nl.interaction);
    const int steps = cfg.steps();
    Solution sol;
    IterationTrace& tr = sol.trace;
    tr.M = lp_hs_norm(u0, cfg.s0, cfg.p).value;
    tr.M_s = lp_hs_norm(u0, cfg.s, cfg.p).value;
    const double sigma = cfg.s0 - 1.01;
    SpacetimeField prev = SpacetimeField::zeros(spec, 1, cfg.T, steps);
    for (int n = 1; n <= cfg.n_max; ++n) {
        std::vector<Field> G;
        G.reserve(prev.size());
        for (const Field& sl : prev.slices()) G.push_back(remainder_G(sl, nl));
        const SpacetimeField Gs(prev.times(), std::move(G));
        LinearRun run = solve_linear(prev, u0, Gs, nl, cfg);
        int iters = 0;
        for (int k : run.iterations) iters += k;
        tr.gmres_iterations.push_back(iters);
        if (run.flagged) sol.flagged = true;
        const SpacetimeField d = difference(run.w, prev);
        tr.diff.push_back(lp_xs(d, 0.0, cfg.p));
        tr.diff_sigma.push_back(lp_xs(d, sigma, cfg.p));
        tr.norm_s.push_back(lp_xs(run.w, cfg.s, cfg.p));
        tr.norm_s0.push_back(lp_xs(run.w, cfg.s0, cfg.p));
        const double R = cfg.R;
        tr.exterior_s0.push_back(lp_xs(radial_multiply(run.w, [R](double r) { return chi_exterior(r, R); }), cfg.s0, cfg.p));
        if (cfg.check_trapping) {
            const auto g = metric_from_field(run.w.slices().back(), nl);
            tr.traps.push_back(compute_L(*g, cfg.R, cfg.trap, tr.M));
        }
        prev = std::move(run.w);
        const std::size_t m = tr.diff.size();
        if (!std::isfinite(tr.diff.back())) {
            sol.diverged = true;
            sol.note = "non-finite iterate";
            break;
        }
        if (tr.diff.back() <= cfg.tol) {
            sol.converged = true;
            break;
        }
        if (m >= 3 && tr.diff[m - 1] > tr.diff[m - 2] && tr.diff[m - 2] > tr.diff[m - 3]) {
            sol.diverged = true;
            sol.note = "difference norm grew on two consecutive iterations";
            break;
        }
    }
    if (!sol.converged && sol.note.empty()) sol.note = "iteration cap reached";
    if (sol.flagged && sol.note.empty()) sol.note = "inner solve did not reach tolerance";
    sol.u = std::move(prev);
    return sol;
}

RVec contraction_ratios(const IterationTrace& tr, int first, int last) {
    RVec r;
    for (int n = std::max(first, 2); n <= last && n <= static_cast<int>(tr.diff.size()); ++n)
        r.push_back(tr.diff[n - 1] / tr.diff[n - 2]);
    return r;
}

namespace {

// i (d_j(g^{jk} d_k u) - F) minus the i Delta part handled exactly
struct DirectRhs {
    const NonlinearitySpec& nl;
    GridSpec spec;
    std::vector<RVec> xi;  // odd-derivative wave numbers
    RVec lap;              // -sum xi_j^2 over the same wave numbers

    DirectRhs(const NonlinearitySpec& n, const GridSpec& s) : nl(n), spec(s) {
        const auto& tab = spectral_tables(s);
        xi = tab.xi_odd;
        lap.assign(s.size(), 0.0);
        for (int a = 0; a < s.d; ++a)
            for (std::size_t i = 0; i < s.size(); ++i) lap[i] -= xi[a][i] * xi[a][i];
    }

    CVec deriv(const CVec& hat, int a) const {
        CVec h(hat.size());
        for (std::size_t i = 0; i < h.size(); ++i) h[i] = I * xi[a][i] * hat[i];
        return fft::inverse(spec, h);
    }

    CVec operator()(const CVec& u) const {
        const std::size_t N = u.size();
        const int d = spec.d;
        const CVec hat = fft::forward(spec, u);
        std::array<CVec, 2> du;
        for (int a = 0; a < d; ++a) du[a] = deriv(hat, a);
        CVec out(N, 0.0);
        std::array<CVec, 2> flux;
        for (int a = 0; a < d; ++a) flux[a].assign(N, 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            PointState st;
            st.u = u[i];
            for (int a = 0; a < d; ++a) {
                st.p[a] = du[a][i];
                st.q[a] = std::conj(du[a][i]);
            }
            const MetricEval me = nl.metric(st);
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k) flux[j][i] += me.g[packed(j, k)] * du[k][i];
            out[i] = -nl.forcing(st).F;
        }
        for (int j = 0; j < d; ++j) {
            const CVec fh = fft::forward(spec, flux[j]);
            const CVec dj = deriv(fh, j);
            for (std::size_t i = 0; i < N; ++i) out[i] += dj[i];
        }
        CVec lh(N);
        for (std::size_t i = 0; i < N; ++i) lh[i] = lap[i] * hat[i];
        const CVec lu = fft::inverse(spec, lh);
        for (std::size_t i = 0; i < N; ++i) out[i] = I * (out[i] - lu[i]);
        return out;
    }

    CVec propagate(const CVec& u, double h) const {
        CVec hat = fft::forward(spec, u);
        for (std::size_t i = 0; i < hat.size(); ++i) hat[i] *= std::exp(I * lap[i] * h);
        return fft::inverse(spec, hat);
    }
};

}  // namespace

SpacetimeField direct_integrate(const Field& u0, const NonlinearitySpec& nl, double T, int steps, int substeps) {
    if (steps < 1 || substeps < 1) throw std::invalid_argument("direct_integrate: steps must be positive");
    const GridSpec& spec = u0.spec();
    const DirectRhs Nl(nl, spec);
    const double h = T / (steps * static_cast<double>(substeps));
    const std::size_t N = spec.size();
    std::vector<double> t(steps + 1);
    std::vector<Field> out;
    out.reserve(steps + 1);
    out.push_back(u0);
    CVec u = u0.comp();
    auto comb = [N](const CVec& a, double c, const CVec& b) {
        CVec r(N);
        for (std::size_t i = 0; i < N; ++i) r[i] = a[i] + c * b[i];
        return r;
    };
    for (int s = 1; s <= steps; ++s) {
        for (int q = 0; q < substeps; ++q) {
            const CVec k1 = Nl(u);
            const CVec eu = Nl.propagate(u, 0.5 * h);
            const CVec k2 = Nl(Nl.propagate(comb(u, 0.5 * h, k1), 0.5 * h));
            const CVec k3 = Nl(comb(eu, 0.5 * h, k2));
            const CVec k4 = Nl(comb(Nl.propagate(u, h), h, Nl.propagate(k3, 0.5 * h)));
            const CVec a = Nl.propagate(comb(u, h / 6, k1), h);
            const CVec b = Nl.propagate(comb(k2, 1.0, k3), 0.5 * h);
            for (std::size_t i = 0; i < N; ++i) u[i] = a[i] + h / 6 * (2.0 * b[i] + k4[i]);
        }
        t[s] = T * s / steps;
        Field f(spec);
        f.comp() = u;
        out.push_back(std::move(f));
    }
    return SpacetimeField(std::move(t), std::move(out));
}

EnvelopeTrace envelope_trace(const Solution& sol, const SolverConfig& cfg, double delta, double sigma) {
    EnvelopeTrace et;
    const Field& u0 = sol.u.slice(0);
    et.data_blocks = hs_blocks(u0, cfg.s, cfg.p);
    et.envelope = make_envelope(et.data_blocks, delta, sigma).c;
    const NormReport nr = lp_xs_norm(sol.u, cfg.s, cfg.p);
    const double cmax = et.envelope.empty() ? 0.0 : *std::max_element(et.envelope.begin(), et.envelope.end());
    for (const auto& e : nr.per_scale) {
        et.solution_blocks.push_back(e.value);
        const std::size_t k = static_cast<std::size_t>(e.k);
        const double c = k < et.envelope.size() ? et.envelope[k] : 0.0;
        const double r = c > 1e-14 * cmax && c > 0.0 ? e.value / c : 0.0;
        et.ratio.push_back(r);
        et.max_ratio = std::max(et.max_ratio, r);
    }
    const int kmax = u0.spec().k_max();
    for (const Field& sl : sol.u.slices()) {
        RVec row;
        for (int k = 0; k <= kmax; ++k) row.push_back(lp_project(sl, k).l2());
        et.band_l2.push_back(std::move(row));
    }
    return et;
}

DependenceTable continuous_dependence(const Field& u0, const Field& profile, const std::vector<double>& scales,
                                      const NonlinearitySpec& nl, const SolverConfig& cfg) {
    DependenceTable tab;
    const Solution base = iterate(u0, nl, cfg);
    const std::array<double, 2> sigmas{0.0, cfg.s0 - 1.01};
    for (double sc : scales) {
        Field dv = profile;
        dv *= sc;
        const Solution run = iterate(u0 + dv, nl, cfg);
        const bool ok = base.converged && run.converged;
        const SpacetimeField diff = difference(run.u, base.u);
        bool any = false;
        for (double sg : sigmas) {
            DependenceRow row;
            row.scale = sc;
            row.sigma = sg;
            row.diff = lp_xs(diff, sg, cfg.p);
            row.data_diff = lp_hs_norm(dv, sg, cfg.p).value;
            row.included = ok && row.data_diff > 0.0;
            row.ratio = row.included ? row.diff / row.data_diff : 0.0;
            any = any || row.included;
            tab.rows.push_back(row);
        }
        if (!any) tab.excluded.push_back(sc);
    }
    return tab;
}

Field incoming_part(const Field& u, double R, int sectors) {
    const GridSpec& spec = u.spec();
    const std::size_t N = spec.size();
    const auto& tab = spectral_tables(spec);
    const CVec hat = fft::forward(spec, u.comp());
    auto radial = [R](double r) { return chi_above(r, 4 * R, 5 * R); };
    Field out(spec);
    auto accumulate = [&](const RVec& weight, const Vec2& dir) {
        CVec h(N);
        for (std::size_t i = 0; i < N; ++i) h[i] = weight[i] * hat[i];
        const CVec part = fft::inverse(spec, h);
        for (std::size_t i = 0; i < N; ++i) {
            const Vec2 x = spec.coord(i);
            const double r = spec.d == 1 ? std::abs(x[0]) : std::hypot(x[0], x[1]);
            const double rad = radial(r);
            if (rad == 0.0) continue;
            const double c = (x[0] * dir[0] + (spec.d == 2 ? x[1] * dir[1] : 0.0)) / r;
            out.comp()[i] += rad * chi_in(c) * part[i];
        }
    };
    if (spec.d == 1) {
        for (double sgn : {-1.0, 1.0}) {
            RVec w(N);
            for (std::size_t i = 0; i < N; ++i) {
                const double k = tab.xi[0][i];
                w[i] = k == 0.0 ? 0.5 : (k * sgn > 0 ? 1.0 : 0.0);
            }
            accumulate(w, {sgn, 0.0});
        }
        return out;
    }
    const double pi = std::numbers::pi;
    const double width = 2 * pi / sectors;
    for (int m = 0; m < sectors; ++m) {
        const double phi_m = m * width;
        RVec w(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double phi = std::atan2(tab.xi[1][i], tab.xi[0][i]);
            double dphi = std::remainder(phi - phi_m, 2 * pi);
            const double t = std::abs(dphi) / width;
            w[i] = t < 1.0 ? std::cos(0.5 * pi * t) * std::cos(0.5 * pi * t) : 0.0;
        }
        accumulate(w, {std::cos(phi_m), std::sin(phi_m)});
    }
    return out;
}

LocalEnergyReport local_energy_report(const Solution& sol, const NonlinearitySpec& nl, double R) {
    LocalEnergyReport rep;
    const SpacetimeField& u = sol.u;
    if (u.size() == 0) return rep;
    const GridSpec& spec = u.spec();
    rep.x0 = lp_xs(u, 0.0, 2.0);
    std::vector<Field> inc, G;
    for (const Field& sl : u.slices()) {
        inc.push_back(incoming_part(sl, R));
        G.push_back(remainder_G(sl, nl));
    }
    rep.incoming = lp_xs(SpacetimeField(u.times(), std::move(inc)), 0.0, 2.0);
    rep.forcing = lp_ys_norm_upper(SpacetimeField(u.times(), std::move(G)), 0.0, 2.0).value;
    const SpacetimeField cu = radial_multiply(u, [R](double r) { return chi_below(r, R, 2 * R); });
    const auto& tab = spectral_tables(spec);
    const RVec w = cu.time_weights();
    double acc = 0.0;
    for (std::size_t t = 0; t < cu.size(); ++t) {
        const CVec h = fft::forward(spec, cu.slice(t).comp());
        double s = 0.0;
        for (std::size_t i = 0; i < h.size(); ++i) s += std::sqrt(1.0 - tab.laplacian[i]) * std::norm(h[i]);
        // unnormalized transform: Parseval with 1/N and the cell volume
        acc += w[t] * s * spec.cell_volume() / static_cast<double>(spec.size());
    }
    rep.compact = std::sqrt(acc);
    rep.data = u.slice(0).l2();
    const double denom = rep.data + rep.forcing;
    rep.x0_ratio = denom > 0.0 ? rep.x0 / denom : 0.0;
    const double d2 = rep.incoming + rep.data + rep.forcing;
    rep.compact_ratio = d2 > 0.0 ? rep.compact / d2 : 0.0;
    return rep;
}

}  // namespace qls
