#include "qls/hamilton.hpp"

#include <cmath>
#include <stdexcept>

#include "qls/simd.hpp"

namespace qls {

namespace {

constexpr int pk(int j, int k) { return j == k ? 2 * j : 1; }

// Quintic Hermite basis on [0,1]: value, slope, curvature at t = 0 then at t = 1.
void hermite_basis(double t, std::array<double, 6>& b, std::array<double, 6>& db) {
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    b[0] = 1 - 10 * t3 + 15 * t4 - 6 * t5;
    b[1] = t - 6 * t3 + 8 * t4 - 3 * t5;
    b[2] = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5);
    b[3] = 10 * t3 - 15 * t4 + 6 * t5;
    b[4] = -4 * t3 + 7 * t4 - 3 * t5;
    b[5] = 0.5 * (t3 - 2 * t4 + t5);
    db[0] = -30 * t2 + 60 * t3 - 30 * t4;
    db[1] = 1 - 18 * t2 + 32 * t3 - 15 * t4;
    db[2] = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4);
    db[3] = 30 * t2 - 60 * t3 + 30 * t4;
    db[4] = -12 * t2 + 28 * t3 - 15 * t4;
    db[5] = 0.5 * (3 * t2 - 8 * t3 + 5 * t4);
}

RVec real_derivative(const GridSpec& spec, const RVec& f, int axis) {
    const CVec c(f.begin(), f.end());
    const CVec d = spectral_derivative(spec, c, axis);
    RVec out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) out[i] = d[i].real();
    return out;
}

}  // namespace

std::shared_ptr<Metric> radial_conformal_metric(int d, std::function<std::array<double, 2>(double)> gd) {
    return std::make_shared<AnalyticMetric>(d, [d, gd](const Vec2& x) {
        const double r = std::hypot(x[0], d == 2 ? x[1] : 0.0);
        const auto [gam, dgam] = gd(r);
        MetricSample s;
        s.g = {gam, 0.0, gam};
        if (r > 0.0)
            for (int a = 0; a < d; ++a) {
                const double v = dgam * x[a] / r;
                s.dg[a] = {v, 0.0, d == 2 ? v : 0.0};
            }
        return s;
    });
}

// ---------------------------------------------------------------- grid metric

GridMetric::GridMetric(const GridSpec& spec, const std::array<RVec, 3>& g, Interp mode) : spec_(spec), mode_(mode), g_(g) {
    spec.validate();
    const int ncomp = spec.d == 2 ? 3 : 1;
    for (int q = 0; q < ncomp; ++q)
        if (g_[q].size() != spec.size()) throw std::invalid_argument("GridMetric: size mismatch");
    if (spec.d == 1) {
        g_[1].assign(spec.size(), 0.0);
        g_[2].assign(spec.size(), 1.0);
    }
    if (mode_ == Interp::hermite) {
        for (int q = 0; q < ncomp; ++q) {
            auto& D = der_[q];
            D[0] = g_[q];
            D[3] = real_derivative(spec, D[0], 0);
            D[6] = real_derivative(spec, D[3], 0);
            if (spec.d == 2) {
                for (int a = 0; a < 3; ++a) {
                    D[a * 3 + 1] = real_derivative(spec, D[a * 3], 1);
                    D[a * 3 + 2] = real_derivative(spec, D[a * 3 + 1], 1);
                }
            }
        }
    } else {
        for (int q = 0; q < ncomp; ++q) hat_[q] = fft::forward(spec, CVec(g_[q].begin(), g_[q].end()));
    }
}

MetricSample GridMetric::eval(const Vec2& x) const { return mode_ == Interp::hermite ? eval_hermite(x) : eval_trig(x); }

MetricSample GridMetric::eval_hermite(const Vec2& x) const {
    const double h = spec_.spacing();
    const double P = spec_.period();
    const int n = spec_.n;
    std::array<int, 2> i0{0, 0};
    std::array<std::array<double, 6>, 2> B{}, dB{};
    for (int a = 0; a < spec_.d; ++a) {
        double s = (x[a] + 0.5 * P) / h;
        s -= n * std::floor(s / n);
        int i = static_cast<int>(std::floor(s));
        if (i >= n) i = n - 1;
        i0[a] = i;
        hermite_basis(s - i, B[a], dB[a]);
    }
    MetricSample out;
    const int ncomp = spec_.d == 2 ? 3 : 1;
    if (spec_.d == 1) {
        const auto& D = der_[0];
        const int il = i0[0], ir = (il + 1) % n;
        const double c[6] = {D[0][il], h * D[3][il], h * h * D[6][il], D[0][ir], h * D[3][ir], h * h * D[6][ir]};
        double v = 0.0, dv = 0.0;
        for (int m = 0; m < 6; ++m) {
            v += c[m] * B[0][m];
            dv += c[m] * dB[0][m];
        }
        out.g = {v, 0.0, 1.0};
        out.dg[0] = {dv / h, 0.0, 0.0};
        out.dg[1] = {0.0, 0.0, 0.0};
        return out;
    }
    std::array<int, 2> ix{i0[0], (i0[0] + 1) % n}, iy{i0[1], (i0[1] + 1) % n};
    const double hp[3] = {1.0, h, h * h};
    for (int q = 0; q < ncomp; ++q) {
        const auto& D = der_[q];
        double v = 0.0, vx = 0.0, vy = 0.0;
        for (int cx = 0; cx < 2; ++cx)
            for (int cy = 0; cy < 2; ++cy) {
                const std::size_t idx = static_cast<std::size_t>(ix[cx]) * n + iy[cy];
                for (int a = 0; a < 3; ++a) {
                    const double bx = B[0][cx * 3 + a], dbx = dB[0][cx * 3 + a];
                    for (int b = 0; b < 3; ++b) {
                        const double coef = D[a * 3 + b][idx] * hp[a] * hp[b];
                        const double by = B[1][cy * 3 + b], dby = dB[1][cy * 3 + b];
                        v += coef * bx * by;
                        vx += coef * dbx * by;
                        vy += coef * bx * dby;
                    }
                }
            }
        out.g[q] = v;
        out.dg[0][q] = vx / h;
        out.dg[1][q] = vy / h;
    }
    return out;
}

MetricSample GridMetric::eval_trig(const Vec2& x) const {
    const auto& tab = spectral_tables(spec_);
    const double x0 = -0.5 * spec_.period();
    const int n = spec_.n;
    const double invN = 1.0 / static_cast<double>(spec_.size());
    MetricSample out;
    const int ncomp = spec_.d == 2 ? 3 : 1;
    if (spec_.d == 1) {
        CVec e(n), de(n);
        for (int k = 0; k < n; ++k) {
            e[k] = std::exp(cplx(0.0, tab.xi[0][k] * (x[0] - x0)));
            de[k] = cplx(0.0, tab.xi_odd[0][k]) * e[k];
        }
        const cplx v = simd::active().cdot(hat_[0].data(), e.data(), n);
        const cplx dv = simd::active().cdot(hat_[0].data(), de.data(), n);
        out.g = {v.real() * invN, 0.0, 1.0};
        out.dg[0] = {dv.real() * invN, 0.0, 0.0};
        return out;
    }
    // xi tables are laid out row-major: axis 0 varies with the row index
    CVec e0(n), de0(n), e1(n), de1(n);
    for (int k = 0; k < n; ++k) {
        const std::size_t r = static_cast<std::size_t>(k) * n, c = static_cast<std::size_t>(k);
        e0[k] = std::exp(cplx(0.0, tab.xi[0][r] * (x[0] - x0)));
        de0[k] = cplx(0.0, tab.xi_odd[0][r]) * e0[k];
        e1[k] = std::exp(cplx(0.0, tab.xi[1][c] * (x[1] - x0)));
        de1[k] = cplx(0.0, tab.xi_odd[1][c]) * e1[k];
    }
    for (int q = 0; q < ncomp; ++q) {
        cplx v = 0.0, vx = 0.0, vy = 0.0;
        for (int k0 = 0; k0 < n; ++k0) {
            const cplx* row = hat_[q].data() + static_cast<std::size_t>(k0) * n;
            const cplx s = simd::active().cdot(row, e1.data(), n);
            const cplx sy = simd::active().cdot(row, de1.data(), n);
            v += e0[k0] * s;
            vx += de0[k0] * s;
            vy += e0[k0] * sy;
        }
        out.g[q] = v.real() * invN;
        out.dg[0][q] = vx.real() * invN;
        out.dg[1][q] = vy.real() * invN;
    }
    return out;
}

// ---------------------------------------------------------------- flows

double hamiltonian(const Metric& g, const PhasePoint& p) {
    const MetricSample s = g.eval(p.x);
    const int d = g.dim();
    double a = 0.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) a += s.g[pk(j, k)] * p.xi[j] * p.xi[k];
    return a;
}

PhasePoint vector_field(const Metric& g, const PhasePoint& p, FlowKind kind) {
    const MetricSample s = g.eval(p.x);
    const int d = g.dim();
    PhasePoint v;
    for (int j = 0; j < d; ++j) {
        double xd = 0.0;
        for (int k = 0; k < d; ++k) xd += 2.0 * s.g[pk(j, k)] * p.xi[k];
        v.x[j] = xd;
        double ax = 0.0;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) ax += s.dg[j][pk(a, b)] * p.xi[a] * p.xi[b];
        v.xi[j] = -ax;
    }
    if (kind == FlowKind::cosphere) {
        // -a_x + (a_x . xi) xi, with v.xi holding -a_x
        double dot = 0.0;
        for (int j = 0; j < d; ++j) dot += -v.xi[j] * p.xi[j];
        for (int j = 0; j < d; ++j) v.xi[j] += dot * p.xi[j];
    }
    return v;
}

namespace {

// State: x0 x1 xi0 xi1 length
using State = std::array<double, 5>;

State pack(const PhasePoint& p, double l) { return {p.x[0], p.x[1], p.xi[0], p.xi[1], l}; }
PhasePoint unpack(const State& s) { return PhasePoint{{s[0], s[1]}, {s[2], s[3]}}; }

State rhs(const Metric& g, const State& s, FlowKind kind) {
    const PhasePoint v = vector_field(g, unpack(s), kind);
    return {v.x[0], v.x[1], v.xi[0], v.xi[1], std::hypot(v.x[0], v.x[1])};
}

State axpy_state(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms) {
    State out = y;
    for (const auto& [c, k] : terms)
        if (c != 0.0)
            for (int i = 0; i < 5; ++i) out[i] += h * c * (*k)[i];
    return out;
}

struct DPOut {
    State y5;
    double err = 0.0;
};

DPOut dp_step(const Metric& g, const State& y, double h, FlowKind kind, const FlowOptions& opt) {
    const State k1 = rhs(g, y, kind);
    const State k2 = rhs(g, axpy_state(y, h, {{1.0 / 5, &k1}}), kind);
    const State k3 = rhs(g, axpy_state(y, h, {{3.0 / 40, &k1}, {9.0 / 40, &k2}}), kind);
    const State k4 = rhs(g, axpy_state(y, h, {{44.0 / 45, &k1}, {-56.0 / 15, &k2}, {32.0 / 9, &k3}}), kind);
    const State k5 = rhs(g, axpy_state(y, h, {{19372.0 / 6561, &k1}, {-25360.0 / 2187, &k2}, {64448.0 / 6561, &k3}, {-212.0 / 729, &k4}}), kind);
    const State k6 = rhs(g, axpy_state(y, h, {{9017.0 / 3168, &k1}, {-355.0 / 33, &k2}, {46732.0 / 5247, &k3}, {49.0 / 176, &k4}, {-5103.0 / 18656, &k5}}), kind);
    DPOut o;
    o.y5 = axpy_state(y, h, {{35.0 / 384, &k1}, {500.0 / 1113, &k3}, {125.0 / 192, &k4}, {-2187.0 / 6784, &k5}, {11.0 / 84, &k6}});
    const State k7 = rhs(g, o.y5, kind);
    const double e[7] = {35.0 / 384 - 5179.0 / 57600, 0.0, 500.0 / 1113 - 7571.0 / 16695, 125.0 / 192 - 393.0 / 640,
                         -2187.0 / 6784 + 92097.0 / 339200, 11.0 / 84 - 187.0 / 2100, -1.0 / 40};
    const State* ks[7] = {&k1, &k2, &k3, &k4, &k5, &k6, &k7};
    double err = 0.0;
    for (int i = 0; i < 5; ++i) {
        double ei = 0.0;
        for (int s = 0; s < 7; ++s) ei += e[s] * (*ks[s])[i];
        ei *= h;
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(o.y5[i]));
        err = std::max(err, std::abs(ei) / sc);
    }
    o.err = err;
    return o;
}

State rk4_state(const Metric& g, const State& y, double h, FlowKind kind) {
    const State k1 = rhs(g, y, kind);
    const State k2 = rhs(g, axpy_state(y, h, {{0.5, &k1}}), kind);
    const State k3 = rhs(g, axpy_state(y, h, {{0.5, &k2}}), kind);
    const State k4 = rhs(g, axpy_state(y, h, {{1.0, &k3}}), kind);
    return axpy_state(y, h, {{1.0 / 6, &k1}, {1.0 / 3, &k2}, {1.0 / 3, &k3}, {1.0 / 6, &k4}});
}

void renormalize(State& s, FlowKind kind) {
    if (kind != FlowKind::cosphere) return;
    const double n = std::hypot(s[2], s[3]);
    if (n > 0.0) {
        s[2] /= n;
        s[3] /= n;
    }
}

struct AdaptiveResult {
    State y;
    double h_used = 0.0, h_next = 0.0;
    int rejections = 0;
    bool ok = false;
};

AdaptiveResult adaptive_step(const Metric& g, const State& y, double h, FlowKind kind, const FlowOptions& opt) {
    AdaptiveResult r;
    h = std::min(h, opt.h_max);
    while (true) {
        if (h < opt.h_min || r.rejections > opt.max_rejections) return r;
        const DPOut o = dp_step(g, y, h, kind, opt);
        const bool finite = std::isfinite(o.err);
        if (finite && o.err <= 1.0) {
            r.y = o.y5;
            renormalize(r.y, kind);
            r.h_used = h;
            const double fac = o.err > 0.0 ? 0.9 * std::pow(o.err, -0.2) : 5.0;
            r.h_next = std::min(opt.h_max, h * std::clamp(fac, 0.2, 5.0));
            r.ok = true;
            return r;
        }
        ++r.rejections;
        const double fac = finite ? 0.9 * std::pow(o.err, -0.25) : 0.1;
        h *= std::clamp(fac, 0.1, 0.5);
    }
}

}  // namespace

StepResult flow_step(const Metric& g, const PhasePoint& p, double h, FlowKind kind, const FlowOptions& opt) {
    const AdaptiveResult a = adaptive_step(g, pack(p, 0.0), h, kind, opt);
    StepResult r;
    r.ok = a.ok;
    r.rejections = a.rejections;
    if (a.ok) {
        r.p = unpack(a.y);
        r.h_used = a.h_used;
        r.h_next = a.h_next;
    } else {
        r.p = p;
    }
    return r;
}

PhasePoint flow_to(const Metric& g, PhasePoint p, double T, FlowKind kind, const FlowOptions& opt) {
    if (T < 0.0) throw std::invalid_argument("flow_to: negative time");
    State y = pack(p, 0.0);
    double t = 0.0, h = opt.h_init;
    while (t < T) {
        const double hh = std::min(h, T - t);
        const AdaptiveResult a = adaptive_step(g, y, hh, kind, opt);
        if (!a.ok) throw std::runtime_error("flow_to: step size underflow");
        y = a.y;
        t += a.h_used;
        if (T - t < 1e-14 * std::max(1.0, T)) break;
        h = a.h_next;
    }
    return unpack(y);
}

PhasePoint rk4_flow(const Metric& g, PhasePoint p, double T, double dt, FlowKind kind) {
    State y = pack(p, 0.0);
    const long n = std::max(1L, static_cast<long>(std::ceil(T / dt - 1e-12)));
    const double h = T / n;
    for (long i = 0; i < n; ++i) {
        y = rk4_state(g, y, h, kind);
        renormalize(y, kind);
    }
    return unpack(y);
}

// ---------------------------------------------------------------- rays

std::string ray_status_name(RayStatus s) {
    switch (s) {
        case RayStatus::escaped: return "escaped";
        case RayStatus::capped: return "capped";
        case RayStatus::left_grid: return "left-grid";
        case RayStatus::failed: return "failed";
    }
    return "unknown";
}

Ray trace_ray(const Metric& g, const PhasePoint& start, const RayCaps& caps, const FlowOptions& opt) {
    const FlowKind kind = FlowKind::cosphere;
    const double R2 = 2.0 * caps.R;
    Ray ray;
    State y = pack(start, 0.0);
    renormalize(y, kind);
    double t = 0.0, h = caps.fixed_step > 0.0 ? caps.fixed_step : opt.h_init;
    auto radius = [](const State& s) { return std::hypot(s[0], s[1]); };
    ray.min_radius = radius(y);
    if (caps.record) ray.samples.push_back({0.0, unpack(y), 0.0});
    const double hw = g.half_width();
    const long max_steps = 50'000'000;
    double step_sum = 0.0;

    auto single = [&](const State& y0, double hh) {
        State out = caps.fixed_step > 0.0 ? rk4_state(g, y0, hh, kind) : dp_step(g, y0, hh, kind, opt).y5;
        renormalize(out, kind);
        return out;
    };

    while (true) {
        // keep steps short relative to the 2R sphere so crossings are seen
        const PhasePoint v = vector_field(g, unpack(y), kind);
        const double speed = std::max(1e-12, std::hypot(v.x[0], v.x[1]));
        const double h_geom = 0.05 * caps.R / speed;
        State y1;
        double hu;
        if (caps.fixed_step > 0.0) {
            hu = std::min(caps.fixed_step, h_geom);
            y1 = single(y, hu);
        } else {
            FlowOptions o = opt;
            o.h_max = std::min(opt.h_max, h_geom);
            const AdaptiveResult a = adaptive_step(g, y, h, kind, o);
            if (!a.ok) {
                ray.status = RayStatus::failed;
                break;
            }
            y1 = a.y;
            hu = a.h_used;
            h = a.h_next;
        }
        const double r0 = radius(y), r1 = radius(y1);
        const bool in0 = r0 <= R2, in1 = r1 <= R2;
        if (in0 && in1) {
            ray.length_in_2BR += y1[4] - y[4];
        } else if (in0 != in1) {
            double lo = 0.0, hi = 1.0;
            State mid = y1;
            while ((hi - lo) * (y1[4] - y[4]) > caps.crossing_tol) {
                const double th = 0.5 * (lo + hi);
                mid = single(y, th * hu);
                if ((radius(mid) <= R2) == in0) lo = th;
                else hi = th;
            }
            const double lc = y[4] + 0.5 * (lo + hi) * (y1[4] - y[4]);
            ray.length_in_2BR += in0 ? lc - y[4] : y1[4] - lc;
        }
        y = y1;
        t += hu;
        ++ray.steps;
        step_sum += hu;
        ray.min_radius = std::min(ray.min_radius, r1);
        if (caps.record) ray.samples.push_back({t, unpack(y), y[4]});
        if (!std::isfinite(r1)) {
            ray.status = RayStatus::failed;
            break;
        }
        const PhasePoint v1 = vector_field(g, unpack(y), kind);
        if (r1 >= caps.exit_radius && y[0] * v1.x[0] + y[1] * v1.x[1] > 0.0) {
            ray.status = RayStatus::escaped;
            break;
        }
        if (y[4] >= caps.length_cap) {
            ray.status = RayStatus::capped;
            break;
        }
        if (std::abs(y[0]) >= hw || std::abs(y[1]) >= hw) {
            ray.status = RayStatus::left_grid;
            break;
        }
        if (ray.steps >= max_steps) {
            ray.status = RayStatus::failed;
            break;
        }
    }
    ray.length_total = y[4];
    ray.duration = t;
    ray.mean_step = ray.steps > 0 ? step_sum / ray.steps : 0.0;
    return ray;
}

FlowComparison compare_flows(const Metric& g1, const Metric& g2, const PhasePoint& p, double horizon, int samples,
                             FlowKind kind, const FlowOptions& opt) {
    if (samples < 1) throw std::invalid_argument("compare_flows: samples must be >= 1");
    FlowComparison c;
    PhasePoint a = p, b = p;
    double run = 0.0;
    c.t.push_back(0.0);
    c.deviation.push_back(0.0);
    for (int i = 1; i <= samples; ++i) {
        const double dt = horizon / samples;
        a = flow_to(g1, a, dt, kind, opt);
        b = flow_to(g2, b, dt, kind, opt);
        const double dev = std::hypot(a.x[0] - b.x[0], a.x[1] - b.x[1]) + std::hypot(a.xi[0] - b.xi[0], a.xi[1] - b.xi[1]);
        run = std::max(run, dev);
        c.t.push_back(horizon * i / samples);
        c.deviation.push_back(run);
    }
    c.max_deviation = run;
    return c;
}

}  // namespace qls
