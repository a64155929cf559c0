#include "qls/nontrap.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "qls/cutoff.hpp"
#include "qls/parallel.hpp"

namespace qls {

namespace {

const double kPi = std::acos(-1.0);

std::array<RVec, 3> metric_minus_identity(const Field& u0, const NonlinearitySpec& nl) {
    const MetricField mf = metric_of(u0, nl);
    std::array<RVec, 3> out = mf.g;
    for (double& v : out[0]) v -= 1.0;
    for (double& v : out[2]) v -= 1.0;
    if (u0.spec().d == 1) {
        out[1].assign(out[0].size(), 0.0);
        out[2].assign(out[0].size(), 0.0);
    }
    return out;
}

}  // namespace

double exterior_norm(const Field& u0, const NonlinearitySpec& nl, double R, double s0) {
    const auto& spec = u0.spec();
    const auto dg = metric_minus_identity(u0, nl);
    double total = 0.0;
    for (int q = 0; q < (spec.d == 2 ? 3 : 1); ++q) {
        Field f(spec);
        for (std::size_t i = 0; i < spec.size(); ++i) {
            const Vec2 x = spec.coord(i);
            f.comp()[i] = dg[q][i] * chi_exterior(std::hypot(x[0], spec.d == 2 ? x[1] : 0.0), 0.5 * R);
        }
        total += l1_hs_norm(f, s0).value;
    }
    return total;
}

RSearch find_R(const Field& u0, const NonlinearitySpec& nl, const TrapConfig& cfg) {
    const auto& spec = u0.spec();
    const double half = 0.5 * spec.period();
    const double h = spec.spacing();
    RSearch r;
    double R = cfg.R_min;
    double n = exterior_norm(u0, nl, R, cfg.s0);
    if (n <= cfg.epsilon) {
        r.R = R;
        r.admissible = true;
        r.norm_at_R = n;
        return r;
    }
    double lo = R, nlo = n;
    while (true) {
        R *= 2.0;
        // the cutoff must fit inside the box
        if (R / 4.0 > half) {
            r.R = lo;
            r.admissible = false;
            r.norm_at_R = nlo;
            return r;
        }
        n = exterior_norm(u0, nl, R, cfg.s0);
        if (n <= cfg.epsilon) break;
        lo = R;
        nlo = n;
    }
    double hi = R, nhi = n;
    while (hi - lo > h) {
        const double mid = h * std::round(0.5 * (lo + hi) / h);
        if (mid <= lo || mid >= hi) break;
        const double nm = exterior_norm(u0, nl, mid, cfg.s0);
        if (nm <= cfg.epsilon) {
            hi = mid;
            nhi = nm;
        } else {
            lo = mid;
            nlo = nm;
        }
    }
    r.R = hi;
    r.admissible = true;
    r.norm_at_R = nhi;
    r.norm_below = nlo;
    r.rejected_R = lo;
    return r;
}

std::shared_ptr<GridMetric> metric_from_field(const Field& u0, const NonlinearitySpec& nl, Interp mode) {
    const MetricField mf = metric_of(u0, nl);
    return std::make_shared<GridMetric>(u0.spec(), mf.g, mode);
}

double perturbation_margin(double M, double L, double C0_coeff) { return std::exp(-C0_coeff * (1.0 + M) * (1.0 + M) * L); }

TrapReport compute_L(const Metric& g, double R, const TrapConfig& cfg, double M, double fixed_step) {
    const int d = g.dim();
    std::vector<PhasePoint> seeds;
    const double R2 = 2.0 * R;
    if (d == 1) {
        seeds.push_back({{R2, 0.0}, {-1.0, 0.0}});
        seeds.push_back({{-R2, 0.0}, {1.0, 0.0}});
        for (int i = 0; i < cfg.interior_per_axis; ++i) {
            const double x = -R2 + 2 * R2 * (i + 0.5) / cfg.interior_per_axis;
            seeds.push_back({{x, 0.0}, {1.0, 0.0}});
        }
    } else {
        for (int b = 0; b < cfg.boundary_points; ++b) {
            const double phi = 2 * kPi * b / cfg.boundary_points;
            const Vec2 x{R2 * std::cos(phi), R2 * std::sin(phi)};
            for (int k = 0; k < cfg.directions; ++k) {
                // angles in (-pi/2, pi/2) about the inward normal, normal included for odd counts
                const double th = cfg.directions == 1 ? 0.0 : -0.5 * kPi + kPi * (k + 0.5) / cfg.directions;
                const double a = phi + kPi + th;
                seeds.push_back({x, {std::cos(a), std::sin(a)}});
            }
        }
        for (int i = 0; i < cfg.interior_per_axis; ++i)
            for (int j = 0; j < cfg.interior_per_axis; ++j) {
                const double x0 = -R2 + 2 * R2 * (i + 0.5) / cfg.interior_per_axis;
                const double x1 = -R2 + 2 * R2 * (j + 0.5) / cfg.interior_per_axis;
                if (std::hypot(x0, x1) > R2) continue;
                for (int k = 0; k < cfg.interior_directions; ++k) {
                    const double a = kPi * k / cfg.interior_directions;
                    seeds.push_back({{x0, x1}, {std::cos(a), std::sin(a)}});
                }
            }
    }

    RayCaps caps;
    caps.R = R;
    caps.length_cap = cfg.kappa * 4.0 * R;
    caps.exit_radius = std::min(cfg.exit_factor * R2, 0.95 * g.half_width());
    caps.fixed_step = fixed_step;

    struct Out {
        double len = 0.0;
        bool capped = false, failed = false, left = false;
        long steps = 0;
        double step_sum = 0.0;
    };
    std::vector<Out> res(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        const PhasePoint& s = seeds[i];
        const Ray f = trace_ray(g, s, caps, cfg.flow);
        const Ray b = trace_ray(g, PhasePoint{s.x, {-s.xi[0], -s.xi[1]}}, caps, cfg.flow);
        Out o;
        o.len = f.length_in_2BR + b.length_in_2BR;
        o.capped = f.status == RayStatus::capped || b.status == RayStatus::capped;
        o.failed = f.status == RayStatus::failed || b.status == RayStatus::failed;
        o.left = f.status == RayStatus::left_grid || b.status == RayStatus::left_grid;
        o.steps = f.steps + b.steps;
        o.step_sum = f.mean_step * f.steps + b.mean_step * b.steps;
        res[i] = o;
    });

    TrapReport rep;
    rep.M = M;
    rep.R = R;
    rep.seeds = seeds.size();
    rep.length_cap = caps.length_cap;
    long steps = 0;
    double step_sum = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const Out& o = res[i];
        if (o.len > rep.L) {
            rep.L = o.len;
            rep.worst_seed = seeds[i];
        }
        if (o.capped) ++rep.capped;
        if (o.failed) ++rep.failed;
        if (o.left) ++rep.left_grid;
        steps += o.steps;
        step_sum += o.step_sum;
    }
    rep.trapped = rep.capped > 0;
    if (rep.trapped) rep.L = std::max(rep.L, caps.length_cap);
    rep.mean_step = steps > 0 ? step_sum / steps : 0.0;
    rep.C0 = cfg.C0_coeff * (1.0 + M) * (1.0 + M);
    rep.margin = perturbation_margin(M, rep.L, cfg.C0_coeff);
    return rep;
}

double c2_norm(const GridSpec& spec, const std::array<RVec, 3>& f) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    const int nc = spec.d == 2 ? 3 : 1;
    for (int q = 0; q < nc; ++q) {
        if (f[q].empty()) continue;
        const CVec c(f[q].begin(), f[q].end());
        for (auto v : c) s0 = std::max(s0, std::abs(v));
        std::array<CVec, 2> d1;
        for (int a = 0; a < spec.d; ++a) d1[a] = spectral_derivative(spec, c, a);
        for (std::size_t i = 0; i < c.size(); ++i) {
            double g2 = 0.0;
            for (int a = 0; a < spec.d; ++a) g2 += std::norm(d1[a][i]);
            s1 = std::max(s1, std::sqrt(g2));
        }
        std::vector<CVec> d2;
        for (int a = 0; a < spec.d; ++a)
            for (int b = 0; b < spec.d; ++b) d2.push_back(spectral_derivative(spec, d1[a], b));
        for (std::size_t i = 0; i < c.size(); ++i) {
            double h2 = 0.0;
            for (const auto& v : d2) h2 += std::norm(v[i]);
            s2 = std::max(s2, std::sqrt(h2));
        }
    }
    return s0 + s1 + s2;
}

StabilityVerdict check_stability(const GridMetric& g, const std::array<RVec, 3>& dg, const TrapReport& base,
                                 const TrapConfig& cfg) {
    StabilityVerdict v;
    const GridSpec& spec = g.spec();
    v.c2 = c2_norm(spec, dg);
    v.within_guarantee = v.c2 <= base.margin;
    std::array<RVec, 3> pg = g.values();
    for (int q = 0; q < 3; ++q)
        if (!dg[q].empty())
            for (std::size_t i = 0; i < pg[q].size(); ++i) pg[q][i] += dg[q][i];
    const GridMetric pert(spec, pg, g.mode());
    v.perturbed = compute_L(pert, base.R, cfg, base.M);
    v.L_ratio = base.L > 0.0 ? v.perturbed.L / base.L : 1.0;
    v.flag_flipped = v.perturbed.trapped != base.trapped;
    v.ok = v.L_ratio <= 2.0 && !v.flag_flipped;
    return v;
}

EscapeCheck exterior_escape_check(const Metric& g, double R, const TrapConfig& cfg, int radial, int angular, int dirs) {
    std::vector<PhasePoint> seeds;
    const int d = g.dim();
    for (int i = 0; i < radial; ++i) {
        const double r = R * (1.0 + static_cast<double>(i) / std::max(1, radial - 1));
        if (d == 1) {
            seeds.push_back({{r, 0.0}, {1.0, 0.0}});
            seeds.push_back({{-r, 0.0}, {-1.0, 0.0}});
            continue;
        }
        for (int a = 0; a < angular; ++a) {
            const double phi = 2 * kPi * a / angular;
            for (int k = 0; k < dirs; ++k) {
                // strictly outward: within 80 degrees of the radial direction
                const double th = dirs == 1 ? 0.0 : (-0.5 + static_cast<double>(k) / (dirs - 1)) * (kPi * 4.0 / 9.0) * 2.0;
                seeds.push_back({{r * std::cos(phi), r * std::sin(phi)}, {std::cos(phi + th), std::sin(phi + th)}});
            }
        }
    }
    RayCaps caps;
    caps.R = R;
    caps.length_cap = cfg.kappa * 4.0 * R;
    caps.exit_radius = std::min(cfg.exit_factor * 2.0 * R, 0.95 * g.half_width());
    std::vector<double> minr(seeds.size());
    std::vector<char> bad(seeds.size(), 0);
    parallel_for(seeds.size(), [&](std::size_t i) {
        const Ray r = trace_ray(g, seeds[i], caps, cfg.flow);
        minr[i] = r.min_radius;
        bad[i] = r.status != RayStatus::escaped || r.min_radius < 0.5 * R;
    });
    EscapeCheck e;
    e.seeds = seeds.size();
    e.min_radius = 1e300;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        e.failures += bad[i];
        e.min_radius = std::min(e.min_radius, minr[i] / R);
    }
    return e;
}

}  // namespace qls
