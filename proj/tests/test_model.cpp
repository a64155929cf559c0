#include <doctest.h>

#include <cmath>
#include <random>

#include "qls/model.hpp"

using namespace qls;

namespace {

const double kPi = std::acos(-1.0);

Field bump(const GridSpec& g, double amp, double width, double nu = 0.0) {
    return Field::from_function(g, [&](const Vec2& x) {
        const double r2 = x[0] * x[0] + (g.d == 2 ? x[1] * x[1] : 0.0);
        return amp * std::exp(-r2 / (2 * width * width)) * std::exp(cplx(0.0, 2 * kPi * nu * x[0]));
    });
}

CVec random_band_limited(const GridSpec& g, std::mt19937_64& rng, int k1, int k2) {
    std::normal_distribution<double> nd;
    CVec v(g.size());
    for (auto& x : v) x = {nd(rng), nd(rng)};
    // odd derivatives drop the Nyquist mode, so keep test fields off it
    CVec hat = fft::forward(g, lp_project_range(g, v, k1, k2));
    for (std::size_t i = 0; i < hat.size(); ++i) {
        const int i0 = g.d == 1 ? static_cast<int>(i) : static_cast<int>(i / g.n);
        const int i1 = g.d == 1 ? 0 : static_cast<int>(i % g.n);
        if (i0 == g.n / 2 || (g.d == 2 && i1 == g.n / 2)) hat[i] = 0.0;
    }
    return fft::inverse(g, hat);
}

double max_diff(const CVec& a, const CVec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs(const CVec& a) {
    double m = 0.0;
    for (auto v : a) m = std::max(m, std::abs(v));
    return m;
}

cplx inner(const CVec& a, const CVec& b) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

double simd_norm2(const CVec& a) {
    double s = 0.0;
    for (auto v : a) s += std::norm(v);
    return s;
}

CVec derivative(const GridSpec& g, const CVec& f, int axis) { return spectral_derivative(g, f, axis); }

// Paraproduct straight from the block definition.
CVec brute_paraproduct(const GridSpec& g, const CVec& a, const CVec& b) {
    CVec out(g.size(), 0.0);
    for (int n = 4; n <= g.k_max(); ++n) {
        const CVec lo = lp_project_range(g, a, 0, n - 4);
        const CVec hi = lp_project(g, b, n);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += lo[i] * hi[i];
    }
    return out;
}

CVec brute_adjoint(const GridSpec& g, const CVec& a, const CVec& f) {
    CVec out(g.size(), 0.0);
    for (int n = 4; n <= g.k_max(); ++n) {
        const CVec lo = lp_project_range(g, a, 0, n - 4);
        CVec t(g.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::conj(lo[i]) * f[i];
        const CVec p = lp_project(g, t, n);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
    }
    return out;
}

}  // namespace

TEST_CASE("monomial parsing and exact partials") {
    const auto t = parse_monomials("u^2 + 0.5*u*ubar_x - 2*u_x*ubar_y^2");
    REQUIRE(t.size() == 3);
    CHECK(t[0].a == 2);
    CHECK(t[1].coef == cplx(0.5));
    CHECK(t[1].e[0] == 1);
    CHECK(t[2].coef == cplx(-2.0));
    CHECK(t[2].c[0] == 1);
    CHECK(t[2].e[1] == 2);
    CHECK(parse_monomials("0").empty());
    CHECK_THROWS(parse_monomials("u*v"));
    CHECK_THROWS(parse_monomials("u^"));

    // partials against central differences in each independent variable
    const auto terms = parse_monomials("1.5*u^2*ubar + u*ubar_x*u_y - 0.25*ubar_y^3*u_x");
    PointState s;
    s.u = {0.3, -0.7};
    s.p = {cplx(0.2, 0.1), cplx(-0.4, 0.6)};
    s.q = {cplx(0.5, -0.3), cplx(0.1, 0.9)};
    // evaluate with conj(u) treated as independent
    auto F = [&](std::array<cplx, 6> v) {
        return 1.5 * v[0] * v[0] * v[1] + v[0] * v[4] * v[3] - 0.25 * v[5] * v[5] * v[5] * v[2];
    };
    const std::array<cplx, 6> v0{s.u, std::conj(s.u), s.p[0], s.p[1], s.q[0], s.q[1]};
    const ForcingEval e = eval_monomials(terms, s);
    CHECK(std::abs(e.F - F(v0)) < 1e-14);
    const std::array<cplx, 6> got{e.du, e.dub, e.dp[0], e.dp[1], e.dq[0], e.dq[1]};
    for (int i = 0; i < 6; ++i) {
        const double h = 1e-5;
        auto vp = v0, vm = v0;
        vp[i] += h;
        vm[i] -= h;
        const cplx fd = (F(vp) - F(vm)) / (2 * h);
        CHECK(std::abs(fd - got[i]) < 1e-9);
    }
}

TEST_CASE("spec validation") {
    CHECK_NOTHROW(builtin_spec("quadratic", 1).validate());
    CHECK_NOTHROW(builtin_spec("cubic", 2).validate());
    CHECK_THROWS(builtin_spec("nope", 1));
    auto bad = conformal_spec(1, 1.0, parse_monomials("u"));
    CHECK_THROWS(bad.validate());
    auto cub = conformal_spec(1, 1.0, parse_monomials("u^2"), InteractionClass::cubic);
    CHECK_THROWS(cub.validate());
    auto y1 = conformal_spec(1, 1.0, parse_monomials("u*u_y"));
    CHECK_THROWS(y1.validate());
    auto neg = conformal_spec(1, -5.0, {});
    CHECK_THROWS(neg.validate());
}

TEST_CASE("metric_of") {
    GridSpec g{1, 128, 3};
    const auto nl = builtin_spec("conformal", 1, 1.0);
    const auto m0 = metric_of(Field(g), nl);
    for (double v : m0.g[0]) CHECK(v == 1.0);
    CHECK(m0.elliptic_ok);

    const auto m1 = metric_of(bump(g, 1.0, 0.7), nl);
    CHECK(m1.max_eig == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(m1.min_eig >= 1.0);

    const auto tiny = metric_of(bump(g, 1e-7, 0.7), nl);
    CHECK(std::abs(tiny.max_eig - 1.0) < 1e-12);

    GridSpec g2{2, 32, 3};
    const auto m2 = metric_of(bump(g2, 1.0, 0.7), builtin_spec("conformal", 2, 1.0));
    CHECK(m2.conformal);
    CHECK(m2.max_eig == doctest::Approx(2.0).epsilon(1e-12));

    Field nan(g);
    nan.comp()[3] = std::nan("");
    CHECK_THROWS(metric_of(nan, nl));

    // ellipticity flag when the metric degenerates
    NonlinearitySpec weak = conformal_spec(1, -0.9, {});
    weak.c0 = 0.5;
    CHECK_FALSE(metric_of(bump(g, 1.0, 0.7), weak).elliptic_ok);
}

TEST_CASE("linearized coefficients against symbolic oracles") {
    GridSpec g{1, 128, 3};
    const Field u = bump(g, 0.8, 0.6, 0.5);
    const CVec du = derivative(g, u.comp(), 0);

    const auto z = linearized_coeffs(Field(g), builtin_spec("quadratic", 1));
    CHECK(max_abs(z.b[0]) == 0.0);
    CHECK(max_abs(z.bt[0]) == 0.0);
    CHECK(max_abs(z.c) == 0.0);
    CHECK(max_abs(z.ct) == 0.0);

    const auto cs = linearized_coeffs(u, builtin_spec("conformal", 1, 1.0));
    CHECK(cs.finite());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(cs.b[0][i] - std::conj(u.comp()[i]) * du[i]) < 1e-12);
        CHECK(std::abs(cs.bt[0][i] - u.comp()[i] * du[i]) < 1e-12);
    }

    const auto gs = linearized_coeffs(u, builtin_spec("grad_sq", 1));
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(std::abs(gs.b[0][i] + std::conj(du[i])) < 1e-12);
        CHECK(std::abs(gs.bt[0][i] + du[i]) < 1e-12);
        CHECK(std::abs(gs.c[i]) == 0.0);
        CHECK(std::abs(gs.ct[i]) == 0.0);
    }

    // 2D grad_sq: both directions
    GridSpec g2{2, 32, 3};
    const Field u2 = bump(g2, 0.5, 0.8, 0.25);
    const auto cs2 = linearized_coeffs(u2, builtin_spec("grad_sq", 2));
    for (int j = 0; j < 2; ++j) {
        const CVec dj = derivative(g2, u2.comp(), j);
        for (std::size_t i = 0; i < g2.size(); ++i) CHECK(std::abs(cs2.bt[j][i] + dj[i]) < 1e-12);
    }
}

TEST_CASE("paraproduct definitions") {
    GridSpec g{1, 512, 3};
    std::mt19937_64 rng(5);
    const CVec b = random_band_limited(g, rng, 0, g.k_max());
    CVec one(g.size(), 1.0);
    CHECK(max_diff(Paraproduct(g, one).apply(b), lp_project_range(g, b, 4, g.k_max())) < 1e-12);

    const CVec a = random_band_limited(g, rng, 0, g.k_max());
    const CVec lowb = random_band_limited(g, rng, 0, 2);  // support below band 4
    CHECK(max_abs(Paraproduct(g, a).apply(lowb)) < 1e-12);

    // agrees with the block definition
    const CVec tp = Paraproduct(g, a).apply(b);
    CHECK(max_diff(tp, brute_paraproduct(g, a, b)) < 1e-10 * (1 + max_abs(tp)));

    // trichotomy: ab - T_a b - T_b a equals the balanced block sum
    CVec rest(g.size());
    const CVec tba = Paraproduct(g, b).apply(a);
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = a[i] * b[i] - tp[i] - tba[i];
    std::vector<CVec> A, B;
    for (int k = 0; k <= g.k_max(); ++k) {
        A.push_back(lp_project(g, a, k));
        B.push_back(lp_project(g, b, k));
    }
    CVec balanced(g.size(), 0.0);
    for (int m = 0; m <= g.k_max(); ++m)
        for (int n = 0; n <= g.k_max(); ++n)
            if (std::abs(m - n) <= 3)
                for (std::size_t i = 0; i < balanced.size(); ++i) balanced[i] += A[m][i] * B[n][i];
    CHECK(max_diff(rest, balanced) < 1e-9);

    // adjoint pairing and brute adjoint
    const CVec f = random_band_limited(g, rng, 0, g.k_max());
    const Paraproduct P(g, a);
    const cplx lhs = inner(f, P.apply(b));
    const cplx rhs = inner(P.apply_adjoint(f), b);
    CHECK(std::abs(lhs - rhs) < 1e-9 * std::abs(lhs));
    CHECK(max_diff(P.apply_adjoint(f), brute_adjoint(g, a, f)) < 1e-10 * (1 + max_abs(f)));

    // frequency localization: single band N input leaves output near band N
    const int N = 6;
    const CVec bn = lp_project(g, b, N);
    const CVec out = Paraproduct(g, a).apply(bn);
    const CVec hat = fft::forward(g, out);
    const auto& tab = spectral_tables(g);
    double outside = 0.0;
    for (std::size_t i = 0; i < hat.size(); ++i) {
        const double nu = tab.nu[i];
        if (nu < std::ldexp(1.0, N - 1) - std::ldexp(1.0, N - 3) - 1e-9 || nu > std::ldexp(1.0, N + 1) + std::ldexp(1.0, N - 3) + 1e-9)
            outside = std::max(outside, std::abs(hat[i]));
    }
    CHECK(outside < 1e-9 * (1 + max_abs(hat)));

    // Field overload
    const Field fa(g, std::vector<CVec>{a}), fb(g, std::vector<CVec>{b});
    CHECK(max_diff(paraproduct(fa, fb).comp(), tp) == 0.0);
}

TEST_CASE("paradifferential operator") {
    GridSpec g{1, 256, 3};
    std::mt19937_64 rng(8);
    const auto flat = linearized_coeffs(Field(g), builtin_spec("flat", 1));
    const CVec w = random_band_limited(g, rng, 0, g.k_max());
    CVec lap = fft::forward(g, w);
    const auto& tab = spectral_tables(g);
    for (std::size_t i = 0; i < lap.size(); ++i) lap[i] *= tab.laplacian[i];
    lap = fft::inverse(g, lap);
    CHECK(max_diff(ParadiffOperator(flat).apply(w), lap) < 1e-10 * max_abs(lap));
    CHECK(max_abs(ParadiffOperator(flat).apply(CVec(g.size(), 0.0))) == 0.0);

    // high band only
    GridSpec gh{1, 1024, 3};
    const auto flath = linearized_coeffs(Field(gh), builtin_spec("flat", 1));
    const auto& tabh = spectral_tables(gh);
    const CVec wh = random_band_limited(gh, rng, 5, 6);
    CVec laph = fft::forward(gh, wh);
    for (std::size_t i = 0; i < laph.size(); ++i) laph[i] *= tabh.laplacian[i];
    laph = fft::inverse(gh, laph);
    CHECK(max_abs(laph) > 0.0);
    CHECK(max_diff(paradiff_operator(flath, Field(gh, std::vector<CVec>{wh})).comp(), laph) < 1e-10 * max_abs(laph));

    // real symmetric g: <A w, w> is real
    for (int d : {1, 2}) {
        GridSpec gg = d == 1 ? GridSpec{1, 256, 3} : GridSpec{2, 64, 3};
        const auto cs = linearized_coeffs(bump(gg, 1.2, 0.9, 0.3), builtin_spec("quadratic", d, 1.0));
        const ParadiffOperator A(cs, false);
        for (int t = 0; t < 4; ++t) {
            const CVec v = random_band_limited(gg, rng, 0, gg.k_max());
            const cplx q = inner(v, A.apply(v));
            CHECK(std::abs(q.imag()) <= 1e-10 * std::abs(q.real()));
            CHECK(q.real() < 0.0);
        }
    }
}

TEST_CASE("remainder G") {
    GridSpec g{1, 256, 3};
    const auto nl = builtin_spec("quadratic", 1, 1.0);
    CHECK(max_abs(remainder_G(Field(g), nl).comp()) == 0.0);

    // residual identity: P_u u - G(u) equals d(g d u) - F
    for (double amp : {0.1, 0.8}) {
        const Field u = bump(g, amp, 0.5, 2.0);
        const CoefficientSet cs = linearized_coeffs(u, nl);
        CVec lhs = ParadiffOperator(cs).apply(u.comp());
        const CVec G = remainder_G(u, nl).comp();
        for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] -= G[i];
        const CVec rhs = quasilinear_operator(u, nl);
        CHECK(max_diff(lhs, rhs) < 1e-9 * (1 + max_abs(rhs)));
    }

    // low bands: G = F - d((g - 1) d u) + 1/2 d T_g^* d u, evaluated independently
    const Field u = Field(g, std::vector<CVec>{lp_project_range(g, bump(g, 0.6, 1.0).comp(), 0, 2)});
    const CVec& v = u.comp();
    const CVec dv = derivative(g, v, 0);
    CVec gm1(g.size()), gfull(g.size()), F(g.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        gm1[i] = std::norm(v[i]) * dv[i];
        gfull[i] = 1.0 + std::norm(v[i]);
        F[i] = v[i] * v[i] + v[i] * std::conj(dv[i]);
    }
    const CVec dflux = derivative(g, gm1, 0);
    const CVec adj = derivative(g, brute_adjoint(g, gfull, dv), 0);
    CVec expect(g.size());
    for (std::size_t i = 0; i < expect.size(); ++i) expect[i] = F[i] - dflux[i] + 0.5 * adj[i];
    CHECK(max_diff(remainder_G(u, nl).comp(), expect) < 1e-9);
}

TEST_CASE("G envelope probe") {
    GridSpec g{1, 512, 3};
    const auto nl = builtin_spec("quadratic", 1, 1.0);
    const Field u = bump(g, 0.02, 0.6, 1.0);
    const auto r = g_envelope_probe(u, nl, 2.5);
    REQUIRE(r.ratio.size() == static_cast<std::size_t>(g.k_max() + 1));
    CHECK(std::isfinite(r.max_ratio));
    CHECK(r.max_ratio > 0.0);
    // G is quadratic: halving u quarters the ratio against an envelope linear in u
    const auto r2 = g_envelope_probe(cplx(0.5) * u, nl, 2.5);
    CHECK(r2.max_ratio == doctest::Approx(0.5 * r.max_ratio).epsilon(0.05));
    std::string line;
    for (double x : r.ratio) line += std::to_string(x) + " ";
    MESSAGE("S_k G / c_k: " << line);
}

TEST_CASE("w-bar conjugation") {
    GridSpec g{1, 2048, 3};
    std::mt19937_64 rng(21);

    // bt = 0
    const auto flat = linearized_coeffs(Field(g), builtin_spec("flat", 1));
    const auto id = build_conjugation(flat);
    CHECK(id.trivial);
    const CVec w0 = random_band_limited(g, rng, 0, g.k_max());
    CHECK(max_diff(id.apply(w0), w0) == 0.0);

    // constant bt on a flat metric: ||R conj(w)|| ~ |bt| / (2 * 2 pi 2^k) ||w||
    CoefficientSet cs = flat;
    const cplx btc(0.6, 0.8);
    cs.bt[0].assign(g.size(), btc);
    const auto op = build_conjugation(cs);
    CHECK_FALSE(op.trivial);
    CHECK(op.contracting);
    CHECK(op.norm_estimate <= 0.5);
    for (int k : {5, 6}) {
        const CVec wk = lp_project(g, bump(g, 1.0, 1.0, std::ldexp(1.0, k)).comp(), k);
        const CVec wb = [&] { CVec t(wk.size()); for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::conj(wk[i]); return t; }();
        const CVec rw = op.apply_R(wb);
        const double ratio = std::sqrt(simd_norm2(rw)) / std::sqrt(simd_norm2(wk));
        const double expect = std::abs(btc) / (2.0 * 2 * kPi * std::ldexp(1.0, k));
        CHECK(ratio >= expect / 2);
        CHECK(ratio <= expect * 2);
        // principal cancellation is exact for constant coefficients
        const auto cr = conjugation_coupling(op, cs, wk);
        CHECK(cr.conjugated <= 1e-10 * cr.unconjugated);
    }

    // variable coefficients from a real state
    for (int d : {1, 2}) {
        GridSpec gg = d == 1 ? GridSpec{1, 512, 3} : GridSpec{2, 128, 2};
        const auto csv = linearized_coeffs(bump(gg, 1.5, 0.5, 0.25), builtin_spec("quadratic", d, 1.0));
        const auto opv = build_conjugation(csv);
        CHECK(opv.contracting);
        CHECK(conjugation_norm(opv) <= 0.5 + 1e-9);
        const CVec w = random_band_limited(gg, rng, 0, gg.k_max());
        const CVec s = opv.apply(w);
        const auto inv = opv.invert(s);
        CHECK(inv.converged);
        CHECK(max_diff(inv.w, w) < 1e-10 * max_abs(w));

        const int k = gg.k_max();
        const CVec wk = random_band_limited(gg, rng, k, k);
        const auto cr = conjugation_coupling(opv, csv, wk);
        MESSAGE("d=" << d << " l0=" << opv.ell0 << " coupling " << cr.unconjugated << " -> " << cr.conjugated);
        CHECK(cr.conjugated <= std::ldexp(1.0, -opv.ell0) * cr.unconjugated);
    }

    // non-conformal 2D metric
    GridSpec g2{2, 32, 3};
    NonlinearitySpec aniso = builtin_spec("quadratic", 2, 1.0);
    aniso.conformal = false;
    aniso.metric = [](const PointState& s) {
        MetricEval e;
        e.g = {1.0 + std::norm(s.u), 0.0, 1.0};
        e.du = {std::conj(s.u), 0.0, 0.0};
        e.dub = {s.u, 0.0, 0.0};
        return e;
    };
    const auto csa = linearized_coeffs(bump(g2, 1.0, 0.8, 0.25), aniso);
    CHECK_FALSE(csa.metric.conformal);
    CHECK_THROWS(build_conjugation(csa));
}
