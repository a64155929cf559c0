#include "qls/multiplier.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

#include "qls/cutoff.hpp"
#include "qls/parallel.hpp"

namespace qls {

namespace {

double norm(const Vec2& v, int d) { return d == 1 ? std::abs(v[0]) : std::hypot(v[0], v[1]); }
double dot(const Vec2& a, const Vec2& b, int d) { return d == 1 ? a[0] * b[0] : a[0] * b[0] + a[1] * b[1]; }

Vec2 unit(const Vec2& xi, int d) {
    const double n = norm(xi, d);
    if (!(n > 0.0)) throw std::invalid_argument("phase symbol: zero covector");
    return d == 1 ? Vec2{xi[0] / n, 0.0} : Vec2{xi[0] / n, xi[1] / n};
}

// cos of the angle between x and xhat; 0 at the origin
double cos_angle(const Vec2& x, const Vec2& xhat, int d) {
    const double r = norm(x, d);
    return r > 0.0 ? dot(x, xhat, d) / r : 0.0;
}

}  // namespace

double PhaseSymbol::operator()(const Vec2& x, const Vec2& xi) const { return rule(x, unit(xi, d)); }

std::vector<PhasePoint> phase_net(int d, double r_min, double r_max, int radii, int angles, int dirs) {
    std::vector<PhasePoint> net;
    const double pi = std::numbers::pi;
    for (int i = 0; i < radii; ++i) {
        const double r = radii == 1 ? r_min : r_min + (r_max - r_min) * i / (radii - 1);
        if (d == 1) {
            for (double sx : {-1.0, 1.0})
                for (double sxi : {-1.0, 1.0}) {
                    if (r == 0.0 && sx < 0) continue;
                    net.push_back({{sx * r, 0.0}, {sxi, 0.0}});
                }
            continue;
        }
        const int na = r == 0.0 ? 1 : angles;
        for (int a = 0; a < na; ++a) {
            const double phi = 2 * pi * (a + 0.5 * (i % 2)) / na;
            for (int k = 0; k < dirs; ++k) {
                const double th = 2 * pi * (k + 0.25) / dirs;
                net.push_back({{r * std::cos(phi), r * std::sin(phi)}, {std::cos(th), std::sin(th)}});
            }
        }
    }
    return net;
}

std::vector<PhasePoint> random_phase_net(int d, double r_max, int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<PhasePoint> net;
    net.reserve(count);
    const double pi = std::numbers::pi;
    while (static_cast<int>(net.size()) < count) {
        PhasePoint p;
        if (d == 1) {
            p.x = {r_max * U(rng), 0.0};
            p.xi = {U(rng) < 0 ? -1.0 : 1.0, 0.0};
        } else {
            p.x = {r_max * U(rng), r_max * U(rng)};
            if (std::hypot(p.x[0], p.x[1]) > r_max) continue;
            const double th = pi * U(rng);
            p.xi = {std::cos(th), std::sin(th)};
        }
        net.push_back(p);
    }
    return net;
}

SymbolCheck check_symbol(const PhaseSymbol& q, const std::vector<PhasePoint>& net) {
    SymbolCheck c;
    c.samples = net.size();
    RVec vals(net.size());
    parallel_for(net.size(), [&](std::size_t i) { vals[i] = q(net[i].x, net[i].xi); });
    c.min = std::numeric_limits<double>::infinity();
    c.max = -c.min;
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double v = vals[i];
        if (!std::isfinite(v)) {
            c.finite = false;
            continue;
        }
        c.min = std::min(c.min, v);
        c.max = std::max(c.max, v);
        if (q.nonnegative && v < -1e-14) ++c.negative;
        const double r = norm(net[i].x, q.d);
        if (v != 0.0 && (r < q.inner_radius || r > q.outer_radius)) ++c.off_support;
    }
    return c;
}

void write_symbol_csv(std::ostream& os, const PhaseSymbol& q, const std::vector<PhasePoint>& net) {
    os << "x0,x1,xi0,xi1," << q.name << "\n";
    os.precision(12);
    for (const auto& p : net)
        os << p.x[0] << "," << p.x[1] << "," << p.xi[0] << "," << p.xi[1] << "," << q(p.x, p.xi) << "\n";
}

MuSequence build_mu(const GridSpec& spec, const std::array<RVec, 3>& g, const std::array<CVec, 2>& b, double R,
                    double width) {
    spec.validate();
    if (!(R > 0.0) || !(width > 0.0)) throw std::invalid_argument("build_mu: R and width must be positive");
    const int d = spec.d;
    const std::size_t N = spec.size();
    const std::array<int, 3> slots = d == 1 ? std::array<int, 3>{0, -1, -1} : std::array<int, 3>{0, 1, 2};
    RVec q(N, 0.0);
    for (int s : slots) {
        if (s < 0) continue;
        if (g[s].size() != N) throw std::invalid_argument("build_mu: metric component size");
        const double id = s == 1 ? 0.0 : 1.0;
        CVec c(N);
        for (std::size_t i = 0; i < N; ++i) {
            c[i] = g[s][i];
            q[i] += std::abs(g[s][i] - id);
        }
        for (int a = 0; a < d; ++a) {
            const CVec dc = spectral_derivative(spec, c, a);
            for (std::size_t i = 0; i < N; ++i) q[i] += std::abs(dc[i].real());
        }
    }
    for (int a = 0; a < d; ++a)
        if (!b[a].empty())
            for (std::size_t i = 0; i < N; ++i) q[i] += std::abs(b[a][i]);

    MuSequence m;
    m.R = R;
    m.width = width;
    double rmax = 0.0;
    for (std::size_t i = 0; i < N; ++i) rmax = std::max(rmax, norm(spec.coord(i), d));
    const int K = std::max(1, static_cast<int>(std::ceil((rmax - R) / width)));
    m.shell_max.assign(K, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double r = norm(spec.coord(i), d);
        if (r < R) continue;
        const int k = std::min(K - 1, static_cast<int>((r - R) / width));
        m.shell_max[k] = std::max(m.shell_max[k], q[i]);
    }
    const double ref = *std::max_element(m.shell_max.begin(), m.shell_max.end());
    m.raw.assign(K, 0.0);
    for (int k = 0; k < K; ++k) m.raw[k] = ref > 0.0 ? std::sqrt(m.shell_max[k] / ref) : 0.0;
    m.raw[0] = 1.0;
    // neighbours within a factor 2
    m.mu = m.raw;
    for (int k = 1; k < K; ++k) m.mu[k] = std::max(m.mu[k], 0.5 * m.mu[k - 1]);
    for (int k = K - 2; k >= 0; --k) m.mu[k] = std::max(m.mu[k], 0.5 * m.mu[k + 1]);
    m.square_sum = 0.0;
    for (double v : m.mu) m.square_sum += v * v;
    return m;
}

RadialWeight build_rho(const MuSequence& mu) {
    if (mu.mu.empty() || !(mu.square_sum > 0.0)) throw std::invalid_argument("build_rho: empty mu");
    RadialWeight w;
    w.R = mu.R;
    w.width = mu.width;
    const std::size_t K = mu.mu.size();
    w.knots.assign(K + 1, 1.0);
    w.slope.assign(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double inc = mu.mu[k] * mu.mu[k] / mu.square_sum;
        w.slope[k] = inc / mu.width;
        w.knots[k + 1] = w.knots[k] + inc;
    }
    w.knots[K] = 2.0;
    w.c = 1.0 / (mu.square_sum * mu.width);
    return w;
}

double RadialWeight::operator()(double r) const {
    if (r <= R) return 1.0;
    const double t = (r - R) / width;
    const std::size_t k = static_cast<std::size_t>(t);
    if (k >= slope.size()) return 2.0;
    return std::min(2.0, knots[k] + slope[k] * (r - R - k * width));
}

double RadialWeight::deriv(double r) const {
    if (r < R) return 0.0;
    const std::size_t k = static_cast<std::size_t>((r - R) / width);
    return k < slope.size() ? slope[k] : 0.0;
}

double chi_in(double t) { return chi_below(t, -0.5, -0.25); }
double chi_in_deriv(double t) { return -smooth_step_deriv((t + 0.5) / 0.25) / 0.25; }

PhaseSymbol incoming_symbol(double R, const RadialWeight& rho, double c) {
    PhaseSymbol s;
    s.name = "q_in";
    s.inner_radius = 4 * R;
    s.support = "|x| > 4R, cos(theta) < -1/4 + 2c";
    s.rule = [R, rho, c](const Vec2& x, const Vec2& xh) {
        const double r = std::hypot(x[0], x[1]);
        if (r <= 4 * R) return 0.0;
        const double p = rho(r);
        return p * chi_above(r, 4 * R, 5 * R) * chi_in(cos_angle(x, xh, 2) - c * p);
    };
    return s;
}

PhaseSymbol crude_incoming_symbol(double R) {
    PhaseSymbol s;
    s.name = "p_in";
    s.inner_radius = 4 * R;
    s.support = "|x| > 4R, cos(theta) < -1/4";
    s.rule = [R](const Vec2& x, const Vec2& xh) {
        const double r = std::hypot(x[0], x[1]);
        return chi_above(r, 4 * R, 5 * R) * chi_in(cos_angle(x, xh, 2));
    };
    return s;
}

namespace {

PhaseSymbol shifted_incoming(double R, const std::string& name, double r_in, double r_out, double c_one, double c_zero) {
    PhaseSymbol s;
    s.name = name;
    s.support = "y = x - 8R xi: |y| > " + std::to_string(r_in / R) + "R, cos angle(y, xi) < " + std::to_string(c_zero);
    s.rule = [=](const Vec2& x, const Vec2& xh) {
        const Vec2 y{x[0] - 8 * R * xh[0], x[1] - 8 * R * xh[1]};
        const double ry = std::hypot(y[0], y[1]);
        const double radial = chi_above(ry, r_in, r_out);
        if (radial == 0.0) return 0.0;
        return radial * chi_below(cos_angle(y, xh, 2), c_one, c_zero);
    };
    return s;
}

}  // namespace

PhaseSymbol chi_fixture(double R) { return shifted_incoming(R, "chi", R, 2 * R, -0.9, -0.75); }

PhaseSymbol chi_tilde_fixture(double R) { return shifted_incoming(R, "chi_tilde", 0.5 * R, R, -0.8, -0.65); }

TransportSymbol::TransportSymbol(std::shared_ptr<const Metric> g, PhaseSymbol chi, double R, double CM,
                                 TransportOptions opt)
    : g_(std::move(g)), chi_(std::move(chi)), R_(R), CM_(CM), opt_(opt) {
    if (!g_) throw std::invalid_argument("transport: null metric");
    if (!(R > 0.0) || !(CM >= 0.0)) throw std::invalid_argument("transport: need R > 0 and CM >= 0");
    if (opt_.ds <= 0.0) opt_.ds = R / 200.0;
    if (opt_.s_cap <= 0.0) opt_.s_cap = 4 * opt_.box_factor * R;
}

Characteristic TransportSymbol::trace(const Vec2& x0, const Vec2& xi0) const {
    const int d = g_->dim();
    const Vec2 xh = unit(xi0, d);
    Characteristic out;
    // state: x, xi, integral
    using S = std::array<double, 5>;
    auto rhs = [&](const S& s, double t) {
        const PhasePoint p{{s[0], s[1]}, {s[2], s[3]}};
        const PhasePoint v = vector_field(*g_, p, FlowKind::cosphere);
        const double c = chi_.rule(p.x, unit(p.xi, d));
        return S{v.x[0], v.x[1], v.xi[0], v.xi[1], std::exp(CM_ * t) * c};
    };
    auto axpy = [](const S& a, double h, const S& k) {
        S r;
        for (int i = 0; i < 5; ++i) r[i] = a[i] + h * k[i];
        return r;
    };
    S s{x0[0], x0[1], xh[0], xh[1], 0.0};
    const double h = opt_.ds;
    const double box = opt_.box_factor * R_;
    const double hw = g_->half_width();
    double t = 0.0;
    for (;;) {
        const Vec2 x{s[0], s[1]};
        const Vec2 xi{s[2], s[3]};
        const double c = chi_.rule(x, unit(xi, d));
        if (c > 0.0 && out.s_enter < 0.0) out.s_enter = t;
        const double r = norm(x, d);
        if (c == 0.0 && dot(x, unit(xi, d), d) >= opt_.clear_factor * R_) break;
        if (r > box || std::abs(x[0]) > hw || (d == 2 && std::abs(x[1]) > hw)) {
            if (c > 0.0) {
                out.flagged = true;
                out.reason = "left the box inside supp chi";
            }
            break;
        }
        if (t >= opt_.s_cap) {
            out.flagged = true;
            out.reason = "flow time cap";
            break;
        }
        const S k1 = rhs(s, t);
        const S k2 = rhs(axpy(s, 0.5 * h, k1), t + 0.5 * h);
        const S k3 = rhs(axpy(s, 0.5 * h, k2), t + 0.5 * h);
        const S k4 = rhs(axpy(s, h, k3), t + h);
        for (int i = 0; i < 5; ++i) s[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
        t += h;
    }
    out.s_end = t;
    out.value = s[4];
    if (!std::isfinite(out.value)) {
        out.flagged = true;
        out.reason = "overflow";
    }
    return out;
}

PhaseSymbol TransportSymbol::symbol() const {
    PhaseSymbol s;
    s.name = "q";
    s.d = g_->dim();
    s.outer_radius = opt_.box_factor * R_;
    s.support = "backward flow-out of supp chi";
    auto self = std::make_shared<TransportSymbol>(*this);
    s.rule = [self](const Vec2& x, const Vec2& xh) { return self->trace(x, xh).value; };
    return s;
}

double flat_transport_oracle(const PhaseSymbol& chi, const Vec2& x, const Vec2& xi, double CM, double s_end,
                             double tol) {
    const int d = chi.d;
    const Vec2 xh = unit(xi, d);
    auto f = [&](double s) {
        const Vec2 p{x[0] + 2 * s * xh[0], x[1] + 2 * s * xh[1]};
        return std::exp(CM * s) * chi.rule(p, xh);
    };
    std::function<double(double, double, double, double, double, double, int)> rec;
    rec = [&](double a, double b, double fa, double fm, double fb, double whole, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
        const double flm = f(lm), frm = f(rm);
        const double left = (m - a) / 6 * (fa + 4 * flm + fm);
        const double right = (b - m) / 6 * (fm + 4 * frm + fb);
        const double diff = left + right - whole;
        if (depth <= 0 || std::abs(diff) <= 15 * tol * std::max(1.0, std::abs(whole)))
            return left + right + diff / 15;
        return rec(a, m, fa, flm, fm, left, depth - 1) + rec(m, b, fm, frm, fb, right, depth - 1);
    };
    // fixed panels keep the recursion from missing a narrow support
    const int panels = std::max(1, static_cast<int>(std::ceil(s_end / 0.25)));
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double a = s_end * i / panels, b = s_end * (i + 1) / panels;
        const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
        total += rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), 40);
    }
    return total;
}

QComp assemble_qcomp(const PhaseSymbol& q, const PhaseSymbol& chi_tilde, double R, const std::vector<PhasePoint>& net,
                     double cover_threshold) {
    QComp out;
    out.symbol.name = "q_comp";
    out.symbol.d = q.d;
    out.symbol.outer_radius = 80 * R;
    out.symbol.support = "|x| <= 80R";
    out.symbol.rule = [q, chi_tilde, R](const Vec2& x, const Vec2& xh) {
        const double cut = chi_below(norm(x, q.d), 75 * R, 80 * R);
        if (cut == 0.0) return 0.0;
        return cut * (q.rule(x, xh) + chi_tilde.rule(x, xh));
    };
    RVec qv(net.size()), cv(net.size());
    parallel_for(net.size(), [&](std::size_t i) {
        qv[i] = q(net[i].x, net[i].xi);
        cv[i] = chi_tilde(net[i].x, net[i].xi);
    });
    out.cover.min_cover = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < net.size(); ++i) {
        if (!(qv[i] > 0.0)) continue;
        ++out.cover.support_samples;
        out.cover.min_cover = std::min(out.cover.min_cover, cv[i]);
    }
    if (out.cover.support_samples == 0) out.cover.min_cover = 0.0;
    out.cover.ok = out.cover.support_samples == 0 || out.cover.min_cover >= cover_threshold;
    return out;
}

double minus_hamilton_derivative(const PhaseSymbol& q, const Metric& g, const PhasePoint& p, double hx, double hxi,
                                 double* grad_norm) {
    const int d = g.dim();
    const MetricSample s = g.eval(p.x);
    auto pk = [](int j, int k) { return j + k; };  // packed (00, 01, 11)
    auto d4 = [&](auto&& f, double h) { return (f(-2 * h) - 8 * f(-h) + 8 * f(h) - f(2 * h)) / (12 * h); };
    double Hq = 0.0, gx = 0.0, gxi = 0.0;
    for (int j = 0; j < d; ++j) {
        const double qx = d4(
            [&](double t) {
                Vec2 x = p.x;
                x[j] += t;
                return q(x, p.xi);
            },
            hx);
        const double qxi = d4(
            [&](double t) {
                Vec2 xi = p.xi;
                xi[j] += t;
                return q(p.x, xi);
            },
            hxi);
        double a_xi = 0.0, a_x = 0.0;
        for (int k = 0; k < d; ++k) a_xi += 2 * s.g[pk(j, k)] * p.xi[k];
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) a_x += s.dg[j][pk(a, b)] * p.xi[a] * p.xi[b];
        Hq += a_xi * qx - a_x * qxi;
        gx += qx * qx;
        gxi += qxi * qxi;
    }
    if (grad_norm) *grad_norm = std::sqrt(gx) + std::sqrt(gxi);
    return -Hq;
}

CommutatorVerdict verify_commutator(const PhaseSymbol& q, const Metric& g, double CM, const std::vector<PhasePoint>& net,
                                    const CommutatorOptions& opt) {
    CommutatorVerdict v;
    v.samples = net.size();
    const int d = g.dim();
    RVec mh(net.size()), qv(net.size()), gr(net.size());
    std::vector<PhasePoint> pts(net.size());
    parallel_for(net.size(), [&](std::size_t i) {
        PhasePoint p = net[i];
        p.xi = unit(p.xi, d);
        pts[i] = p;
        double gn = 0.0;
        mh[i] = minus_hamilton_derivative(q, g, p, opt.h * opt.R, opt.h, &gn);
        qv[i] = q(p.x, p.xi);
        gr[i] = gn;
    });
    v.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < net.size(); ++i) {
        const double m = mh[i] - CM * qv[i];
        if (m < v.min_margin) {
            v.min_margin = m;
            v.witness = pts[i];
        }
        if (norm(pts[i].x, d) < 2 * opt.R) v.inner_min = std::min(v.inner_min, mh[i]);
        if (mh[i] > 1e-12) v.gradient_ratio = std::max(v.gradient_ratio, gr[i] / mh[i]);
        v.sup_q = std::max(v.sup_q, std::abs(qv[i]));
        v.sup_grad = std::max(v.sup_grad, gr[i]);
    }
    v.inner_ok = std::isfinite(v.inner_min) && v.inner_min > 0.0;
    v.pass = v.min_margin >= -opt.tol;
    return v;
}

double gronwall_constant(const CommutatorVerdict& v, double M, double L) {
    const double ml = M * L;
    if (!(ml > 0.0)) return 0.0;
    return std::log(std::max(1.0, v.sup_q + v.sup_grad)) / ml;
}

}  // namespace qls
