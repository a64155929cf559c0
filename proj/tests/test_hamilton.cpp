#include <doctest.h>

#include <cmath>

#include "qls/hamilton.hpp"

using namespace qls;

namespace {

const double kPi = std::acos(-1.0);

std::shared_ptr<Metric> bump_metric(double A, double w) {
    return radial_conformal_metric(2, [A, w](double r) {
        const double e = std::exp(-r * r / (w * w));
        return std::array<double, 2>{1.0 + A * e, -2.0 * r / (w * w) * A * e};
    });
}

std::shared_ptr<Metric> ring_metric(double A, double r0, double w) {
    return radial_conformal_metric(2, [=](double r) {
        const double e = std::exp(-(r - r0) * (r - r0) / (w * w));
        return std::array<double, 2>{1.0 + A * e, -2.0 * (r - r0) / (w * w) * A * e};
    });
}

double dist(const Vec2& a, const Vec2& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

TEST_CASE("flat full flow is a straight line") {
    FlatMetric flat(2);
    const PhasePoint p{{1.0, -2.0}, {0.3, 0.7}};
    const PhasePoint q = flow_to(flat, p, 3.0, FlowKind::full);
    CHECK(dist(q.x, {1.0 + 6 * 0.3, -2.0 + 6 * 0.7}) < 1e-10);
    CHECK(dist(q.xi, p.xi) < 1e-14);
    const auto st = flow_step(flat, p, 0.1, FlowKind::full);
    CHECK(st.ok);
    CHECK(st.h_used == doctest::Approx(0.1));
}

TEST_CASE("bump metric: conservation and reversibility") {
    const auto g = bump_metric(0.5, 2.0);
    const PhasePoint p{{-3.0, 0.7}, {0.8, 0.1}};
    const double a0 = hamiltonian(*g, p);
    PhasePoint q = p;
    for (int i = 1; i <= 5; ++i) {
        q = flow_to(*g, q, 1.0, FlowKind::full);
        CHECK(std::abs(hamiltonian(*g, q) - a0) <= 1e-8 * i);
    }
    // halved-step oracle: the two tolerances agree
    FlowOptions tight;
    tight.atol = tight.rtol = 1e-12;
    const PhasePoint r = flow_to(*g, p, 5.0, FlowKind::full, tight);
    CHECK(dist(r.x, q.x) < 1e-7);

    PhasePoint back{q.x, {-q.xi[0], -q.xi[1]}};
    back = flow_to(*g, back, 5.0, FlowKind::full);
    CHECK(dist(back.x, p.x) < 1e-8);
    CHECK(dist(back.xi, {-p.xi[0], -p.xi[1]}) < 1e-8);
}

TEST_CASE("cosphere flow") {
    FlatMetric flat(2);
    const PhasePoint p{{0.0, 0.0}, {0.6, 0.8}};
    const auto v = vector_field(flat, p, FlowKind::cosphere);
    CHECK(std::hypot(v.x[0], v.x[1]) == doctest::Approx(2.0));

    const auto g = bump_metric(0.5, 2.0);
    PhasePoint q{{-4.0, 0.9}, {1.0, 0.0}};
    for (int i = 0; i < 20; ++i) {
        q = flow_to(*g, q, 0.25, FlowKind::cosphere);
        CHECK(std::abs(std::hypot(q.xi[0], q.xi[1]) - 1.0) < 1e-9);
    }

    // full flow reparametrized by dtau = |xi| dt traces the cosphere x-track
    PhasePoint f{{-4.0, 0.9}, {1.0, 0.0}};
    double tau = 0.0;
    const double dt = 1e-3;
    for (int i = 0; i < 2000; ++i) {
        auto rhs = [&](const PhasePoint& s) {
            const PhasePoint d = vector_field(*g, s, FlowKind::full);
            return std::array<double, 5>{d.x[0], d.x[1], d.xi[0], d.xi[1], std::hypot(s.xi[0], s.xi[1])};
        };
        auto add = [](const PhasePoint& s, const std::array<double, 5>& k, double h) {
            return PhasePoint{{s.x[0] + h * k[0], s.x[1] + h * k[1]}, {s.xi[0] + h * k[2], s.xi[1] + h * k[3]}};
        };
        const auto k1 = rhs(f);
        const auto k2 = rhs(add(f, k1, dt / 2));
        const auto k3 = rhs(add(f, k2, dt / 2));
        const auto k4 = rhs(add(f, k3, dt));
        std::array<double, 5> k;
        for (int c = 0; c < 5; ++c) k[c] = (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]) / 6;
        f = add(f, k, dt);
        tau += dt * k[4];
    }
    const PhasePoint c = flow_to(*g, PhasePoint{{-4.0, 0.9}, {1.0, 0.0}}, tau, FlowKind::cosphere);
    CHECK(dist(c.x, f.x) < 1e-6);
}

TEST_CASE("grid metric interpolation") {
    GridSpec spec{2, 64, 4};
    const double P = spec.period();
    std::array<RVec, 3> g{RVec(spec.size()), RVec(spec.size(), 0.0), RVec(spec.size())};
    auto exact = [&](const Vec2& x) { return 1.0 + 0.3 * std::cos(2 * kPi * x[0] / P) * std::sin(4 * kPi * x[1] / P); };
    for (std::size_t i = 0; i < spec.size(); ++i) {
        g[0][i] = exact(spec.coord(i));
        g[2][i] = g[0][i];
    }
    const GridMetric trig(spec, g, Interp::trig), herm(spec, g, Interp::hermite);
    for (const Vec2 x : {Vec2{0.13, -2.71}, Vec2{5.5, 3.3}, Vec2{-7.9, 7.9}}) {
        const double ex = exact(x);
        const double gx = -0.3 * 2 * kPi / P * std::sin(2 * kPi * x[0] / P) * std::sin(4 * kPi * x[1] / P);
        const double gy = 0.3 * 4 * kPi / P * std::cos(2 * kPi * x[0] / P) * std::cos(4 * kPi * x[1] / P);
        const auto t = trig.eval(x);
        CHECK(std::abs(t.g[0] - ex) < 1e-12);
        CHECK(std::abs(t.dg[0][0] - gx) < 1e-12);
        CHECK(std::abs(t.dg[1][2] - gy) < 1e-12);
        CHECK(std::abs(t.g[1]) < 1e-14);
        const auto h = herm.eval(x);
        CHECK(std::abs(h.g[0] - ex) < 1e-8);
        CHECK(std::abs(h.dg[0][0] - gx) < 1e-6);
        CHECK(std::abs(h.dg[1][2] - gy) < 1e-6);
    }
    // exact at nodes
    const auto h = herm.eval(spec.coord(spec.index(10, 17)));
    CHECK(std::abs(h.g[0] - g[0][spec.index(10, 17)]) < 1e-13);

    // 1D
    GridSpec s1{1, 128, 4};
    std::array<RVec, 3> g1{RVec(s1.size()), RVec(), RVec()};
    for (std::size_t i = 0; i < s1.size(); ++i) g1[0][i] = 1.0 + 0.2 * std::exp(-std::pow(s1.coord(i)[0], 2));
    const GridMetric m1(s1, g1), t1(s1, g1, Interp::trig);
    const Vec2 x{0.37, 0.0};
    const auto a = m1.eval(x), b = t1.eval(x);
    CHECK(std::abs(a.g[0] - (1.0 + 0.2 * std::exp(-0.37 * 0.37))) < 1e-8);
    CHECK(std::abs(a.dg[0][0] - b.dg[0][0]) < 1e-6);
    CHECK(m1.half_width() == doctest::Approx(8.0));
}

TEST_CASE("trace_ray on the flat metric") {
    FlatMetric flat(2);
    const double R = 8.0;
    RayCaps caps;
    caps.R = R;
    caps.exit_radius = 4 * R;
    caps.length_cap = 100 * R;
    caps.record = true;
    const PhasePoint in{{R, 0.0}, {-1.0, 0.0}};
    const Ray r = trace_ray(flat, in, caps);
    const Ray rb = trace_ray(flat, PhasePoint{{R, 0.0}, {1.0, 0.0}}, caps);
    CHECK(r.status == RayStatus::escaped);
    CHECK(r.length_in_2BR == doctest::Approx(3 * R).epsilon(1e-9));
    CHECK(r.length_in_2BR + rb.length_in_2BR == doctest::Approx(4 * R).epsilon(0.005));
    const Ray full = trace_ray(flat, PhasePoint{{2 * R, 0.0}, {-1.0, 0.0}}, caps);
    CHECK(std::abs(full.length_in_2BR - 4 * R) < 1e-6);
    for (const auto& s : r.samples) {
        CHECK(std::abs(s.p.x[0] - (R - 2 * s.t)) < 1e-8);
        CHECK(std::abs(s.p.x[1]) < 1e-12);
        CHECK(s.length == doctest::Approx(2 * s.t));
    }
    // oblique chord: length 2 sqrt((2R)^2 - b^2) for impact parameter b
    const double b = 5.0;
    const Ray o = trace_ray(flat, PhasePoint{{-3 * R, b}, {1.0, 0.0}}, caps);
    CHECK(std::abs(o.length_in_2BR - 2 * std::sqrt(4 * R * R - b * b)) < 1e-6);

    const Ray out = trace_ray(flat, PhasePoint{{R, 1.0}, {0.8, 0.6}}, caps);
    CHECK(out.status == RayStatus::escaped);
    CHECK(out.min_radius >= R / 2);

    // fixed-step oracle agrees
    RayCaps fixed = caps;
    fixed.fixed_step = 0.01;
    fixed.record = false;
    const Ray rf = trace_ray(flat, in, fixed);
    CHECK(std::abs(rf.length_in_2BR - 3 * R) < 1e-6);
}

TEST_CASE("ring well traps tangential rays") {
    const double A = 20.0, r0 = 4.0, w = 1.2;
    const auto g = ring_metric(A, r0, w);
    // stable circular geodesic at the interior maximum of r / sqrt(gamma)
    double best_r = 0.0, best_f = 0.0;
    for (double r = 0.5; r < r0; r += 1e-4) {
        const double f = r / std::sqrt(1.0 + A * std::exp(-(r - r0) * (r - r0) / (w * w)));
        if (f > best_f) {
            best_f = f;
            best_r = r;
        }
    }
    RayCaps caps;
    caps.R = 8.0;
    caps.exit_radius = 32.0;
    caps.length_cap = 25 * 4 * caps.R;
    const Ray r = trace_ray(*g, PhasePoint{{best_r, 0.0}, {0.0, 1.0}}, caps);
    CHECK(r.status == RayStatus::capped);
    CHECK(r.length_total >= caps.length_cap);
    // a radial ray through the centre still escapes
    const Ray rr = trace_ray(*g, PhasePoint{{2 * caps.R, 0.0}, {-1.0, 0.0}}, caps);
    CHECK(rr.status == RayStatus::escaped);
}

TEST_CASE("compare_flows") {
    const auto g = bump_metric(0.5, 2.0);
    const PhasePoint p{{-4.0, 0.5}, {1.0, 0.0}};
    const auto same = compare_flows(*g, *g, p, 4.0, 32);
    CHECK(same.max_deviation < 1e-12);

    std::vector<double> rates;
    std::vector<std::vector<double>> curves;
    for (double eps : {1e-3, 1e-4}) {
        const auto pert = radial_conformal_metric(2, [eps](double r) {
            const double e = std::exp(-r * r / 4.0), e2 = std::exp(-(r - 1.0) * (r - 1.0));
            return std::array<double, 2>{1.0 + 0.5 * e + eps * e2, -r / 2.0 * 0.5 * e - 2 * (r - 1.0) * eps * e2};
        });
        const auto c = compare_flows(*g, *pert, p, 4.0, 40);
        for (std::size_t i = 1; i < c.deviation.size(); ++i) CHECK(c.deviation[i] >= c.deviation[i - 1]);
        CHECK(c.max_deviation > 0.0);
        // smallest Gronwall rate C with dev(t) <= eps e^{C t} on the second half of the horizon
        double slope = 0.0;
        for (std::size_t i = c.t.size() / 2; i < c.t.size(); ++i) slope = std::max(slope, std::log(c.deviation[i] / eps) / c.t[i]);
        for (std::size_t i = c.t.size() / 2; i < c.t.size(); ++i) CHECK(c.deviation[i] <= eps * std::exp(slope * c.t[i]) * (1 + 1e-12));
        MESSAGE("eps " << eps << " rate " << slope << " max dev " << c.max_deviation);
        rates.push_back(slope);
        std::vector<double> scaled;
        for (double dv : c.deviation) scaled.push_back(dv / eps);
        curves.push_back(scaled);
    }
    CHECK(rates[0] == doctest::Approx(rates[1]).epsilon(0.1));
    CHECK(curves[0].back() == doctest::Approx(curves[1].back()).epsilon(0.1));
}
