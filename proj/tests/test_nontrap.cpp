#include <doctest.h>

#include <cmath>

#include "qls/cutoff.hpp"
#include "qls/nontrap.hpp"

using namespace qls;

namespace {

const double kPi = std::acos(-1.0);

Field radial_field(const GridSpec& g, const std::function<double(double)>& f) {
    return Field::from_function(g, [&](const Vec2& x) { return cplx(f(std::hypot(x[0], x[1])), 0.0); });
}

// two conformal bumps centred at +-c rotated by angle th
std::shared_ptr<Metric> twin_bumps(double A, double c, double th) {
    return std::make_shared<AnalyticMetric>(2, [=](const Vec2& x) {
        MetricSample s;
        double g = 1.0, gx = 0.0, gy = 0.0;
        for (double sg : {-1.0, 1.0}) {
            const double cx = sg * c * std::cos(th), cy = sg * c * std::sin(th);
            const double e = A * std::exp(-((x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy)));
            g += e;
            gx += -2 * (x[0] - cx) * e;
            gy += -2 * (x[1] - cy) * e;
        }
        s.g = {g, 0.0, g};
        s.dg[0] = {gx, 0.0, gx};
        s.dg[1] = {gy, 0.0, gy};
        return s;
    });
}

TrapConfig small_cfg() {
    TrapConfig cfg;
    cfg.s0 = 3.1;
    cfg.boundary_points = 32;
    cfg.directions = 9;
    cfg.interior_per_axis = 5;
    cfg.interior_directions = 4;
    return cfg;
}

}  // namespace

TEST_CASE("find_R") {
    GridSpec g{2, 128, 6};
    const auto nl = builtin_spec("conformal", 2, 1.0);
    TrapConfig cfg = small_cfg();
    cfg.epsilon = 1e-3;
    const auto z = find_R(Field(g), nl, cfg);
    CHECK(z.admissible);
    CHECK(z.R == cfg.R_min);
    CHECK(z.norm_at_R == 0.0);

    const Field u = radial_field(g, [](double r) { return 0.5 * std::exp(-r * r / 2.0); });
    const auto r = find_R(u, nl, cfg);
    REQUIRE(r.admissible);
    CHECK(exterior_norm(u, nl, r.R, cfg.s0) <= cfg.epsilon);
    CHECK(exterior_norm(u, nl, r.rejected_R, cfg.s0) > cfg.epsilon);
    CHECK(r.R - r.rejected_R <= g.spacing() + 1e-12);
    CHECK(exterior_norm(u, nl, r.R / 2, cfg.s0) > cfg.epsilon);

    double prev = 0.0;
    for (double amp : {0.25, 0.5, 1.0, 2.0}) {
        const Field ua = radial_field(g, [amp](double rr) { return amp * std::exp(-rr * rr / 2.0); });
        const auto ra = find_R(ua, nl, cfg);
        CHECK(ra.R >= prev);
        prev = ra.R;
    }

    // too wide for the box
    const Field wide = radial_field(g, [](double rr) { return 3.0 * std::exp(-rr * rr / 800.0); });
    CHECK_FALSE(find_R(wide, nl, cfg).admissible);
}

TEST_CASE("compute_L on flat and bump metrics") {
    const TrapConfig cfg = small_cfg();
    FlatMetric flat(2);
    const double R = 8.0;
    const auto rep = compute_L(flat, R, cfg);
    CHECK_FALSE(rep.trapped);
    CHECK(rep.L == doctest::Approx(4 * R).epsilon(0.01));
    CHECK(rep.margin == doctest::Approx(std::exp(-rep.L)));

    const auto bump = radial_conformal_metric(2, [](double r) {
        const double e = std::exp(-r * r / 4.0);
        return std::array<double, 2>{1.0 + 0.2 * e, -r / 2.0 * 0.2 * e};
    });
    const auto rb = compute_L(*bump, R, cfg);
    CHECK_FALSE(rb.trapped);
    CHECK(rb.L == doctest::Approx(4 * R).epsilon(0.1));
    CHECK(rb.L >= 4 * R * 0.95);

    // doubling the net changes L by at most 5%
    TrapConfig dense = cfg;
    dense.boundary_points *= 2;
    dense.directions = 2 * dense.directions + 1;
    dense.interior_per_axis = 2 * dense.interior_per_axis + 1;
    const auto rd = compute_L(*bump, R, dense);
    CHECK(rd.L == doctest::Approx(rb.L).epsilon(0.05));

    // 1D: the line through the interval has length 4R
    FlatMetric line(1);
    CHECK(compute_L(line, 3.0, cfg).L == doctest::Approx(12.0).epsilon(1e-6));
}

TEST_CASE("ring well is trapped, matching the dense oracle") {
    GridSpec g{2, 128, 6};
    const auto nl = builtin_spec("conformal", 2, 1.0);
    const Field u = radial_field(g, [](double r) { return std::sqrt(20.0) * std::exp(-(r - 4) * (r - 4) / (2 * 1.44)); });
    const auto gm = metric_from_field(u, nl);
    TrapConfig cfg = small_cfg();
    cfg.boundary_points = 48;
    cfg.interior_per_axis = 9;
    const auto rep = compute_L(*gm, 8.0, cfg);
    CHECK(rep.trapped);
    CHECK(rep.L >= rep.length_cap);
    const auto oracle = compute_L(*gm, 8.0, cfg, 0.0, rep.mean_step / 10);
    CHECK(oracle.trapped == rep.trapped);

    // weak ring: not trapped
    const Field uw = radial_field(g, [](double r) { return 0.3 * std::exp(-(r - 4) * (r - 4) / (2 * 1.44)); });
    const auto weak = compute_L(*metric_from_field(uw, nl), 8.0, cfg);
    CHECK_FALSE(weak.trapped);
    CHECK(weak.L == doctest::Approx(32.0).epsilon(0.1));
}

TEST_CASE("rotation invariance of L") {
    TrapConfig cfg = small_cfg();
    cfg.boundary_points = 64;
    cfg.directions = 17;
    cfg.interior_per_axis = 9;
    cfg.interior_directions = 8;
    const auto a = compute_L(*twin_bumps(0.4, 3.0, 0.0), 6.0, cfg);
    const auto b = compute_L(*twin_bumps(0.4, 3.0, kPi / 6), 6.0, cfg);
    CHECK_FALSE(a.trapped);
    CHECK(b.L == doctest::Approx(a.L).epsilon(0.02));
}

TEST_CASE("margin and stability") {
    CHECK(perturbation_margin(1.0, 10.0) > perturbation_margin(1.0, 20.0));
    CHECK(perturbation_margin(1.0, 10.0) > perturbation_margin(2.0, 10.0));
    CHECK(perturbation_margin(0.0, 0.0) == 1.0);

    GridSpec g{2, 128, 6};
    const std::array<RVec, 3> flat_g{RVec(g.size(), 1.0), RVec(g.size(), 0.0), RVec(g.size(), 1.0)};
    const GridMetric flat(g, flat_g);
    TrapConfig cfg = small_cfg();
    cfg.C0_coeff = 0.02;  // keeps the margin representable for this check
    const auto base = compute_L(flat, 8.0, cfg, 0.0);
    CHECK(base.L == doctest::Approx(32.0).epsilon(0.01));

    const std::array<RVec, 3> zero{RVec(g.size(), 0.0), RVec(g.size(), 0.0), RVec(g.size(), 0.0)};
    const auto same = check_stability(flat, zero, base, cfg);
    CHECK(same.c2 == 0.0);
    CHECK(same.within_guarantee);
    CHECK(same.perturbed.L == base.L);
    CHECK(same.ok);

    // margin-sized bump
    std::array<RVec, 3> bump{RVec(g.size()), RVec(g.size(), 0.0), RVec(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) {
        const Vec2 x = g.coord(i);
        bump[0][i] = std::exp(-((x[0] - 2) * (x[0] - 2) + x[1] * x[1]) / 8.0);
        bump[2][i] = bump[0][i];
    }
    const double scale = 0.999 * base.margin / c2_norm(g, bump);
    for (auto& c : bump)
        for (double& v : c) v *= scale;
    CHECK(c2_norm(g, bump) == doctest::Approx(0.999 * base.margin));
    const auto v = check_stability(flat, bump, base, cfg);
    CHECK(v.within_guarantee);
    CHECK(v.ok);
    CHECK(v.perturbed.L == doctest::Approx(32.0).epsilon(0.05));

    // analytic C2 norm of a plane wave
    std::array<RVec, 3> wave{RVec(g.size()), RVec(), RVec()};
    const double k = 2 * kPi * 2 / g.period();
    for (std::size_t i = 0; i < g.size(); ++i) wave[0][i] = std::sin(k * g.coord(i)[0]);
    CHECK(c2_norm(g, wave) == doctest::Approx(1 + k + k * k).epsilon(1e-10));
}

TEST_CASE("exterior escape") {
    GridSpec g{2, 128, 6};
    const auto nl = builtin_spec("conformal", 2, 1.0);
    const Field u = radial_field(g, [](double r) { return std::sqrt(0.5) * std::exp(-r * r / 8.0); });
    TrapConfig cfg = small_cfg();
    const auto R = find_R(u, nl, cfg);
    REQUIRE(R.admissible);
    const auto e = exterior_escape_check(*metric_from_field(u, nl), R.R, cfg);
    CHECK(e.seeds > 0);
    CHECK(e.failures == 0);
    CHECK(e.min_radius >= 0.5);
}
