#include <doctest.h>

#include <cmath>
#include <random>

#include "qls/spaces.hpp"

using namespace qls;

namespace {

const double kPi = std::acos(-1.0);

Field gaussian(const GridSpec& g, double width, double nu = 0.0, Vec2 c = {0.0, 0.0}) {
    return Field::from_function(g, [&](const Vec2& x) {
        const double r2 = (x[0] - c[0]) * (x[0] - c[0]) + (g.d == 2 ? (x[1] - c[1]) * (x[1] - c[1]) : 0.0);
        return std::exp(-r2 / (2.0 * width * width)) * std::exp(cplx(0.0, 2.0 * kPi * nu * x[0]));
    });
}

Field random_field(const GridSpec& g, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Field f(g);
    for (auto& v : f.comp()) v = {nd(rng), nd(rng)};
    // smooth a little so every band is populated but not dominated by Nyquist
    return lp_project_range(f, 0, g.k_max());
}

SpacetimeField random_spacetime(const GridSpec& g, std::mt19937_64& rng, double T, int steps) {
    std::vector<double> t;
    std::vector<Field> s;
    const Field a = random_field(g, rng), b = random_field(g, rng);
    for (int i = 0; i <= steps; ++i) {
        const double ti = T * i / steps;
        t.push_back(ti);
        s.push_back(a + cplx(std::cos(3.0 * ti), 0.0) * b);
    }
    return SpacetimeField(t, s);
}

}  // namespace

TEST_CASE("lpj norm oracles") {
    GridSpec g{1, 256, 3};
    CHECK(lpj_norm(Field(g), 1, 2.0) == 0.0);

    // narrow bump at the centre of a scale-1 cube: weight is 1 there
    const double centre = -g.period() / 2 + 2.0 * 1 + 1.0;  // cube index 1 at j=1 spans [-2, 0)
    const Field f = gaussian(g, 0.08, 0.0, {centre, 0.0});
    for (double p : {1.0, 2.0, kInf}) CHECK(lpj_norm(f, 1, p) == doctest::Approx(f.l2()).epsilon(0.05));

    const Field r = gaussian(g, 1.3, 0.7);
    CHECK(lpj_norm(r, g.J, 2.0) == doctest::Approx(r.l2()).epsilon(1e-10));
    CHECK(lpj_norm(r, g.J + 2, 2.0) == doctest::Approx(r.l2()).epsilon(1e-10));

    // ell^2 over a partition with sum chi_Q = 1 is bounded by the global norm
    CHECK(lpj_norm(r, 0, 2.0) <= r.l2() * (1 + 1e-12));
}

TEST_CASE("l1 H^s norm of localized bumps") {
    GridSpec g{1, 512, 4};
    CHECK(l1_hs_norm(Field(g), 2.0).value == 0.0);
    const double s = 1.5;
    for (int k : {2, 3, 4}) {
        const Field f = gaussian(g, 1.0, std::ldexp(1.0, k));
        const double ref = std::pow(2.0, k * s) * f.l2();
        const double v = l1_hs_norm(f, s).value;
        CHECK(v >= ref / 2.0);
        CHECK(v <= ref * 2.0);
    }
    const Field low = gaussian(g, 1.0);
    const double v0 = l1_hs_norm(low, s).value;
    CHECK(v0 >= low.l2() / 2.0);
    CHECK(v0 <= low.l2() * 2.0);
}

TEST_CASE("X norm closed forms and invariances") {
    GridSpec g{1, 128, 3};
    const double T = 0.7;
    const Field one = Field::from_function(g, [](const Vec2&) { return cplx(1.0, 0.0); });
    const auto u = SpacetimeField::constant_in_time(one, T, 20);
    CHECK(x_norm(u) == doctest::Approx(std::sqrt(T)).epsilon(1e-6));
    CHECK(x_norm(SpacetimeField::zeros(g, 1, T, 10)) == 0.0);
    CHECK_THROWS(x_norm(SpacetimeField()));

    const Field f = gaussian(g, 0.9, 1.3);
    const auto still = SpacetimeField::constant_in_time(f, T, 30);
    std::vector<Field> rot;
    for (double t : still.times()) rot.push_back(std::exp(cplx(0.0, 5.0 * t)) * f);
    const SpacetimeField spun(still.times(), rot);
    CHECK(x_norm(spun) == doctest::Approx(x_norm(still)).epsilon(1e-13));
    CHECK(xj_norm(spun, 2) == doctest::Approx(xj_norm(still, 2)).epsilon(1e-13));
    CHECK(l1_xs_norm(spun, 1.0).value == doctest::Approx(l1_xs_norm(still, 1.0).value).epsilon(1e-12));
    const auto ys = y_surrogate(spun, 1), yt = y_surrogate(still, 1);
    CHECK(ys.upper == doctest::Approx(yt.upper).epsilon(1e-12));
    CHECK(ys.lower == doctest::Approx(yt.lower).epsilon(1e-12));

    // X_j dominates both of its ingredients
    for (int j : {0, 2, 4}) {
        CHECK(xj_norm(still, j) >= linf_l2(still));
        CHECK(xj_norm(still, j) >= std::sqrt(std::ldexp(1.0, j)) * x_norm(still) * (1 - 1e-15));
    }
    // 2D constant: top-scale cube gives sqrt(T) * 2^{J/2}
    GridSpec g2{2, 32, 3};
    const Field one2 = Field::from_function(g2, [](const Vec2&) { return cplx(1.0, 0.0); });
    CHECK(x_norm(SpacetimeField::constant_in_time(one2, T, 8)) == doctest::Approx(std::sqrt(T * 8.0)).epsilon(1e-6));
}

TEST_CASE("norm homogeneity and cube-sum monotonicity") {
    std::mt19937_64 rng(7);
    for (int d : {1, 2}) {
        GridSpec g = d == 1 ? GridSpec{1, 128, 3} : GridSpec{2, 32, 3};
        const auto u = random_spacetime(g, rng, 0.5, 6);
        const double lam = -2.75;
        std::vector<Field> sc;
        for (const auto& s : u.slices()) sc.push_back(cplx(lam, 0.0) * s);
        const SpacetimeField v(u.times(), sc);
        CHECK(x_norm(v) == doctest::Approx(std::abs(lam) * x_norm(u)).epsilon(1e-13));
        CHECK(l1_xs_norm(v, 1.5).value == doctest::Approx(std::abs(lam) * l1_xs_norm(u, 1.5).value).epsilon(1e-12));
        CHECK(y_surrogate(v, 1).upper == doctest::Approx(std::abs(lam) * y_surrogate(u, 1).upper).epsilon(1e-12));
        CHECK(y_surrogate(v, 1).lower == doctest::Approx(std::abs(lam) * y_surrogate(u, 1).lower).epsilon(1e-12));
        const Field f = u.slice(2);
        CHECK(l1_hs_norm(cplx(lam, 0.0) * f, 2.0).value == doctest::Approx(std::abs(lam) * l1_hs_norm(f, 2.0).value).epsilon(1e-12));

        for (int j = 0; j <= g.J; ++j) {
            const double a1 = lpj_norm(f, j, 1.0), a2 = lpj_norm(f, j, 2.0), ai = lpj_norm(f, j, kInf);
            CHECK(a1 >= a2 * (1 - 1e-14));
            CHECK(a2 >= ai * (1 - 1e-14));
        }
        const RVec b1 = lp_x_blocks(u, 1.0), b2 = lp_x_blocks(u, 2.0), bi = lp_x_blocks(u, kInf);
        for (std::size_t k = 0; k < b1.size(); ++k) {
            CHECK(b1[k] >= b2[k] * (1 - 1e-14));
            CHECK(b2[k] >= bi[k] * (1 - 1e-14));
        }
    }
}

TEST_CASE("Y surrogate bracket") {
    GridSpec g{1, 128, 3};
    const auto z = y_surrogate(SpacetimeField::zeros(g, 1, 1.0, 5), 2);
    CHECK(z.lower == 0.0);
    CHECK(z.upper == 0.0);

    // single nonzero time slice: one-term split gives the L1 L2 norm
    const Field f = gaussian(g, 0.6, 2.0);
    std::vector<Field> sl(9, Field(g));
    sl[4] = f;
    std::vector<double> t;
    for (int i = 0; i < 9; ++i) t.push_back(0.1 * i);
    const SpacetimeField pulse(t, sl);
    for (int j : {0, 2, 5}) {
        const auto b = y_surrogate(pulse, j);
        CHECK(b.upper <= l1_l2(pulse) + 1e-12);
        CHECK(b.lower <= b.upper);
    }

    // pairing f with itself
    const auto still = SpacetimeField::constant_in_time(f, 1.0, 16);
    for (int j : {0, 1, 3}) {
        const auto b = y_surrogate(still, j);
        const double l2 = l2_l2(still);
        CHECK(b.lower >= l2 * l2 / xj_norm(still, j) * (1 - 1e-12));
        CHECK(b.lower <= b.upper);
    }

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 6; ++trial) {
        GridSpec gg = trial % 2 ? GridSpec{2, 32, 3} : GridSpec{1, 256, 3};
        const auto u = random_spacetime(gg, rng, 0.3 + 0.2 * trial, 5 + trial);
        for (int j : {0, 2, 4}) {
            const auto b = y_surrogate(u, j);
            CHECK(b.lower > 0.0);
            CHECK(b.lower <= b.upper);
            CHECK(b.upper <= l1_l2(u) * (1 + 1e-14));
        }
    }
}

TEST_CASE("frequency envelopes") {
    const auto z = make_envelope(RVec(8, 0.0), 0.25, 2.0);
    for (double v : z.c) CHECK(v == 0.0);

    RVec a(10, 0.0);
    a[5] = 1.0;
    const auto e = make_envelope(a, 0.25, 2.0);
    CHECK(e.c[5] == doctest::Approx(1.0));
    CHECK(e.c[4] == doctest::Approx(0.8408964152537145).epsilon(1e-12));
    CHECK(e.c[6] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(check_envelope(e, a).ok());

    const auto ones = make_envelope(RVec(7, 1.0), 0.25, 2.0);
    for (double v : ones.c) CHECK(v == doctest::Approx(1.0));

    CHECK_THROWS(make_envelope(RVec{1.0, -0.5}, 0.25, 2.0));

    std::mt19937_64 rng(3);
    std::exponential_distribution<double> ex(1.0);
    for (int trial = 0; trial < 200; ++trial) {
        RVec b(3 + trial % 12);
        for (auto& v : b) v = trial % 3 == 0 ? ex(rng) * std::exp(-3.0 * ex(rng)) : ex(rng);
        const double delta = 0.05 + 0.1 * (trial % 5), sigma = 1.0 + (trial % 4);
        const auto env = make_envelope(b, delta, sigma);
        const auto chk = check_envelope(env, b);
        CHECK(chk.dominates);
        CHECK(chk.left_ok);
        CHECK(chk.right_ok);
        CHECK(chk.square_sum_ok);
        CHECK(chk.square_sum_ratio >= 1.0 - 1e-14);
    }

    // against the blocks of a real field
    GridSpec g{1, 256, 3};
    const Field f = gaussian(g, 0.4, 1.0);
    const RVec blocks = hs_blocks(f, 2.0, 1.0);
    const auto env = make_envelope(blocks, 0.25, 2.0);
    for (std::size_t k = 0; k < blocks.size(); ++k) CHECK(std::pow(2.0, 2.0 * k) * lp_project(f, static_cast<int>(k)).l2() <= env.c[k] * (1 + 1e-12));
}

namespace {

SampleGenerator bump_generator(const GridSpec& g, double scale) {
    return [g, scale](std::mt19937_64&, double T) {
        const Field f = cplx(scale, 0.0) * gaussian(g, 0.8, 0.5);
        const auto u = SpacetimeField::constant_in_time(f, T, 8);
        return ProbeSample{u, u};
    };
}

}  // namespace

TEST_CASE("probe u_squared+ is stable under refinement") {
    ProbeConfig cfg;
    cfg.s = 2.5;
    cfg.sigma = 1.5;
    cfg.trials = 1;
    const auto coarse = probe_estimate(EstimateId::u_squared_plus, bump_generator(GridSpec{1, 256, 3}, 1.0), cfg);
    const auto fine = probe_estimate(EstimateId::u_squared_plus, bump_generator(GridSpec{1, 512, 3}, 1.0), cfg);
    CHECK(coarse.sample_count == 1);
    CHECK(std::isfinite(coarse.observed_ratio));
    CHECK(coarse.observed_ratio > 0.0);
    CHECK(fine.observed_ratio == doctest::Approx(coarse.observed_ratio).epsilon(0.10));

    // ratio is scale invariant in the amplitude of v
    const auto big = probe_estimate(EstimateId::u_squared_plus, bump_generator(GridSpec{1, 256, 3}, 3.0), cfg);
    CHECK(big.observed_ratio == doctest::Approx(coarse.observed_ratio).epsilon(1e-10));
}

// Time-constant samples: the left side is min(Y part ~ T^{1/2}, L1L2 part ~ T) and each
// right-side factor is max(X part ~ T^{1/2}, LinfL2 ~ 1). Low frequency sits in the
// L1L2 / LinfL2 regime (ratio ~ T), high frequency in the Y / X regime (ratio ~ T^{-1/2}).
TEST_CASE("probe xxy2+ with delta = 0 over a T sweep") {
    ProbeConfig cfg;
    cfg.s = 2.5;
    cfg.sigma = 1.5;
    cfg.delta = 0.0;
    cfg.trials = 1;
    cfg.T_values = {1.0, 0.5, 0.25};
    auto gen = [](double nu) {
        return SampleGenerator([nu](std::mt19937_64&, double T) {
            GridSpec g{1, 512, 3};
            const auto u = SpacetimeField::constant_in_time(gaussian(g, 0.3, nu), T, 8);
            return ProbeSample{u, u};
        });
    };
    const auto low = probe_estimate(EstimateId::xxy2_plus, gen(0.5), cfg);
    const auto high = probe_estimate(EstimateId::xxy2_plus, gen(8.0), cfg);
    REQUIRE(low.ratio_by_T.size() == 3);
    MESSAGE("xxy2+ low  " << low.ratio_by_T[0] << " " << low.ratio_by_T[1] << " " << low.ratio_by_T[2] << " fit " << low.T_exponent_fit);
    MESSAGE("xxy2+ high " << high.ratio_by_T[0] << " " << high.ratio_by_T[1] << " " << high.ratio_by_T[2] << " fit " << high.T_exponent_fit);
    CHECK(low.T_exponent_fit == doctest::Approx(1.0).epsilon(0.05));
    CHECK(high.T_exponent_fit == doctest::Approx(-0.5).epsilon(0.05));
    for (double r : low.ratio_by_T) CHECK(std::isfinite(r));
}

TEST_CASE("probe bookkeeping and other estimates") {
    GridSpec g{1, 128, 3};
    ProbeConfig cfg;
    cfg.trials = 3;
    SampleGenerator zero = [g](std::mt19937_64&, double T) {
        const auto z = SpacetimeField::zeros(g, 1, T, 4);
        return ProbeSample{z, z};
    };
    const auto r = probe_estimate(EstimateId::u_squared, zero, cfg);
    CHECK(r.skipped == 3);
    CHECK(r.sample_count == 0);
    CHECK(r.observed_ratio == 0.0);
    cfg.trials = 0;
    CHECK_THROWS(probe_estimate(EstimateId::moser, zero, cfg));

    cfg.trials = 2;
    SampleGenerator rnd = [g](std::mt19937_64& rng, double T) {
        const auto u = random_spacetime(g, rng, T, 4);
        const auto v = random_spacetime(g, rng, T, 4);
        return ProbeSample{u, v};
    };
    for (auto id : {EstimateId::u_squared, EstimateId::moser, EstimateId::xxy1_plus, EstimateId::xxxy_plus}) {
        const auto p = probe_estimate(id, rnd, cfg);
        CHECK(p.sample_count == 2);
        CHECK(std::isfinite(p.observed_ratio));
        CHECK(p.observed_ratio > 0.0);
    }
}

TEST_CASE("Bernstein constant is resolution stable") {
    ProbeConfig cfg;
    cfg.trials = 1;
    auto gen = [](int n) {
        return SampleGenerator([n](std::mt19937_64&, double T) {
            GridSpec g{1, n, 3};
            const auto u = SpacetimeField::constant_in_time(gaussian(g, 0.5, 3.0), T, 6);
            return ProbeSample{u, u};
        });
    };
    const auto a = probe_estimate(EstimateId::bernstein, gen(256), cfg);
    const auto b = probe_estimate(EstimateId::bernstein, gen(512), cfg);
    CHECK(a.observed_ratio > 0.0);
    CHECK(a.observed_ratio < 10.0);
    CHECK(b.observed_ratio == doctest::Approx(a.observed_ratio).epsilon(0.25));
}
