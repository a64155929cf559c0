#include "qls/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "qls/simd.hpp"

namespace qls {

namespace {

double combine(const RVec& parts, double p) {
    if (std::isinf(p)) {
        double m = 0.0;
        for (double v : parts) m = std::max(m, v);
        return m;
    }
    if (p == 1.0) return std::accumulate(parts.begin(), parts.end(), 0.0);
    double s = 0.0;
    for (double v : parts) s += std::pow(v, p);
    return std::pow(s, 1.0 / p);
}

void check_p(double p) {
    if (!(p == 1.0 || p == 2.0 || std::isinf(p))) throw std::invalid_argument("norm: p must be 1, 2 or inf");
}

// Pointwise |f|^2 summed over components.
RVec density(const Field& f) {
    RVec r(f.spec().size(), 0.0);
    for (const auto& c : f.comps())
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += std::norm(c[i]);
    return r;
}

// Dyadic sharp-cube pyramid. Level l holds sums of a density over the
// aligned cubes of side 2^l, l = l0..J (base side at least one cell).
struct Pyramid {
    int l0 = 0;
    int J = 0;
    int d = 1;
    std::vector<RVec> sums;  // sums[l - l0], row-major, (count_l)^d entries
    std::vector<int> counts;
};

int base_level(const GridSpec& spec) {
    // smallest l >= 0 with 2^l >= h
    int l = 0;
    while (std::ldexp(1.0, l) < spec.spacing()) ++l;
    return std::min(l, spec.J);
}

Pyramid build_pyramid(const GridSpec& spec, const RVec& base_cells, int l0) {
    Pyramid py;
    py.l0 = l0;
    py.J = spec.J;
    py.d = spec.d;
    int count = 1 << (spec.J - l0);
    py.sums.push_back(base_cells);
    py.counts.push_back(count);
    for (int l = l0 + 1; l <= spec.J; ++l) {
        const RVec& prev = py.sums.back();
        const int pc = count;
        count /= 2;
        RVec next(spec.d == 1 ? count : static_cast<std::size_t>(count) * count, 0.0);
        if (spec.d == 1) {
            for (int q = 0; q < count; ++q) next[q] = prev[2 * q] + prev[2 * q + 1];
        } else {
            for (int a = 0; a < pc; ++a)
                for (int b = 0; b < pc; ++b) next[static_cast<std::size_t>(a / 2) * count + b / 2] += prev[static_cast<std::size_t>(a) * pc + b];
        }
        py.sums.push_back(std::move(next));
        py.counts.push_back(count);
    }
    return py;
}

// Base-level cell sums of a pointwise density (already multiplied by cell volume where needed).
RVec base_cells(const GridSpec& spec, const RVec& dens, int l0) {
    const int per = std::max(1, static_cast<int>(std::lround(std::ldexp(1.0, l0) / spec.spacing())));
    const int count = 1 << (spec.J - l0);
    const int n = spec.n;
    if (spec.d == 1) {
        RVec cells(count, 0.0);
        for (int i = 0; i < n; ++i) cells[i / per] += dens[i];
        return cells;
    }
    RVec cells(static_cast<std::size_t>(count) * count, 0.0);
    for (int i0 = 0; i0 < n; ++i0)
        for (int i1 = 0; i1 < n; ++i1)
            cells[static_cast<std::size_t>(i0 / per) * count + i1 / per] += dens[static_cast<std::size_t>(i0) * n + i1];
    return cells;
}

// Base cells of chi_Q^2 * dens restricted to the cube support.
RVec base_cells_weighted(const GridSpec& spec, const Cube& cube, const RVec& dens, int l0) {
    const int per = std::max(1, static_cast<int>(std::lround(std::ldexp(1.0, l0) / spec.spacing())));
    const int count = 1 << (spec.J - l0);
    const int n = spec.n;
    if (spec.d == 1) {
        RVec cells(count, 0.0);
        for (int i : cube.support[0]) {
            const double w = cube.axis_weight[0][i];
            cells[i / per] += w * w * dens[i];
        }
        return cells;
    }
    RVec cells(static_cast<std::size_t>(count) * count, 0.0);
    for (int i0 : cube.support[0]) {
        const double w0 = cube.axis_weight[0][i0] * cube.axis_weight[0][i0];
        for (int i1 : cube.support[1]) {
            const double w1 = cube.axis_weight[1][i1] * cube.axis_weight[1][i1];
            cells[static_cast<std::size_t>(i0 / per) * count + i1 / per] += w0 * w1 * dens[static_cast<std::size_t>(i0) * n + i1];
        }
    }
    return cells;
}

// sup_l sup_C 2^{-l/2} sqrt(sum_C)
double pyramid_x(const Pyramid& py) {
    double best = 0.0;
    for (std::size_t lvl = 0; lvl < py.sums.size(); ++lvl) {
        const double scale = std::ldexp(1.0, -(py.l0 + static_cast<int>(lvl)));
        double m = 0.0;
        for (double v : py.sums[lvl]) m = std::max(m, v);
        best = std::max(best, std::sqrt(std::max(m, 0.0) * scale));
    }
    return best;
}

// min_l 2^{l/2} sum_C sqrt(sum_C)
double pyramid_ybound(const Pyramid& py) {
    double best = kInf;
    for (std::size_t lvl = 0; lvl < py.sums.size(); ++lvl) {
        const double scale = std::ldexp(1.0, py.l0 + static_cast<int>(lvl));
        double s = 0.0;
        for (double v : py.sums[lvl]) s += std::sqrt(std::max(v, 0.0));
        best = std::min(best, std::sqrt(scale) * s);
    }
    return best;
}

// Per-slice densities |u(t)|^2 (summed over components).
std::vector<RVec> slice_densities(const SpacetimeField& u) {
    std::vector<RVec> r;
    r.reserve(u.size());
    for (const auto& s : u.slices()) r.push_back(density(s));
    return r;
}

RVec time_integrated(const std::vector<RVec>& rho, const RVec& w) {
    RVec D(rho.front().size(), 0.0);
    for (std::size_t t = 0; t < rho.size(); ++t)
        for (std::size_t i = 0; i < D.size(); ++i) D[i] += w[t] * rho[t][i];
    return D;
}

double x_from_density(const GridSpec& spec, const RVec& D) {
    const int l0 = base_level(spec);
    RVec dv(D.size());
    const double h = spec.cell_volume();
    for (std::size_t i = 0; i < D.size(); ++i) dv[i] = D[i] * h;
    return pyramid_x(build_pyramid(spec, base_cells(spec, dv, l0), l0));
}

double ybound_from_density(const GridSpec& spec, const RVec& D) {
    const int l0 = base_level(spec);
    RVec dv(D.size());
    const double h = spec.cell_volume();
    for (std::size_t i = 0; i < D.size(); ++i) dv[i] = D[i] * h;
    return pyramid_ybound(build_pyramid(spec, base_cells(spec, dv, l0), l0));
}

// Band-k pieces of every slice, as per-slice densities.
std::vector<std::vector<RVec>> band_densities(const SpacetimeField& u) {
    const auto& spec = u.spec();
    const auto& tab = spectral_tables(spec);
    const int kmax = spec.k_max();
    const std::size_t N = spec.size();
    std::vector<std::vector<RVec>> out(kmax + 1, std::vector<RVec>(u.size(), RVec(N, 0.0)));
    CVec hat(N), tmp(N);
    for (std::size_t t = 0; t < u.size(); ++t) {
        for (const auto& c : u.slice(t).comps()) {
            fft::forward(spec, c.data(), hat.data());
            for (int k = 0; k <= kmax; ++k) {
                simd::active().rmul(tab.band[k].data(), hat.data(), tmp.data(), N);
                fft::inverse(spec, tmp.data(), tmp.data());
                RVec& r = out[k][t];
                for (std::size_t i = 0; i < N; ++i) r[i] += std::norm(tmp[i]);
            }
        }
    }
    return out;
}

// ||chi_Q v||_{X_j} for every cube at scale j, given per-slice densities of v.
RVec cube_xj_norms(const GridSpec& spec, int j, const std::vector<RVec>& rho, const RVec& w) {
    const auto& cubes = cached_cube_partition(spec, j);
    const RVec D = time_integrated(rho, w);
    const int l0 = base_level(spec);
    const double h = spec.cell_volume();
    RVec Dh(D.size());
    for (std::size_t i = 0; i < D.size(); ++i) Dh[i] = D[i] * h;
    RVec out(cubes.size());
    const double scale = std::ldexp(1.0, j);
    for (std::size_t q = 0; q < cubes.size(); ++q) {
        const auto& cube = cubes[q];
        const double x = pyramid_x(build_pyramid(spec, base_cells_weighted(spec, cube, Dh, l0), l0));
        double linf = 0.0;
        for (const auto& r : rho) linf = std::max(linf, cube.weighted_sum_sq(spec, r) * h);
        out[q] = std::max(std::sqrt(scale) * x, std::sqrt(linf));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------- spatial

double lpj_norm(const Field& f, int j, double p) {
    check_p(p);
    const auto& spec = f.spec();
    const auto& cubes = cached_cube_partition(spec, j);
    const RVec dens = density(f);
    RVec parts(cubes.size());
    for (std::size_t q = 0; q < cubes.size(); ++q)
        parts[q] = std::sqrt(cubes[q].weighted_sum_sq(spec, dens) * spec.cell_volume());
    return combine(parts, p);
}

RVec hs_blocks(const Field& f, double s, double p) {
    const auto& spec = f.spec();
    RVec a(spec.k_max() + 1);
    for (int k = 0; k <= spec.k_max(); ++k) a[k] = std::pow(2.0, s * k) * lpj_norm(lp_project(f, k), k, p);
    return a;
}

NormReport lp_hs_norm(const Field& f, double s, double p) {
    check_p(p);
    NormReport r;
    r.name = (p == 1.0 ? "l1" : p == 2.0 ? "l2" : "linf") + std::string("_H^s");
    const RVec a = hs_blocks(f, s, p);
    double sum = 0.0;
    for (int k = 0; k < static_cast<int>(a.size()); ++k) {
        r.per_scale.push_back({k, a[k]});
        sum += a[k] * a[k];
    }
    r.value = std::sqrt(sum);
    return r;
}

NormReport l1_hs_norm(const Field& f, double s) { return lp_hs_norm(f, s, 1.0); }

Field radial_multiply(const Field& f, const std::function<double(double)>& profile) {
    Field out = f;
    const auto& spec = f.spec();
    RVec w(spec.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const Vec2 x = spec.coord(i);
        w[i] = profile(std::hypot(x[0], spec.d == 2 ? x[1] : 0.0));
    }
    for (auto& c : out.comps()) simd::active().rmul(w.data(), c.data(), c.data(), c.size());
    return out;
}

SpacetimeField radial_multiply(const SpacetimeField& u, const std::function<double(double)>& profile) {
    std::vector<Field> s;
    s.reserve(u.size());
    for (const auto& f : u.slices()) s.push_back(radial_multiply(f, profile));
    return SpacetimeField(u.times(), std::move(s));
}

// ---------------------------------------------------------------- spacetime

double linf_l2(const SpacetimeField& u) {
    double m = 0.0;
    for (const auto& s : u.slices()) m = std::max(m, s.l2());
    return m;
}

double l1_l2(const SpacetimeField& u) {
    const RVec w = u.time_weights();
    double s = 0.0;
    for (std::size_t t = 0; t < u.size(); ++t) s += w[t] * u.slice(t).l2();
    return s;
}

double l2_l2(const SpacetimeField& u) {
    const RVec w = u.time_weights();
    double s = 0.0;
    for (std::size_t t = 0; t < u.size(); ++t) s += w[t] * std::pow(u.slice(t).l2(), 2);
    return std::sqrt(s);
}

double x_norm(const SpacetimeField& u) {
    if (u.size() == 0) throw std::invalid_argument("x_norm: empty time axis");
    return x_from_density(u.spec(), time_integrated(slice_densities(u), u.time_weights()));
}

double xj_norm(const SpacetimeField& u, int j) {
    return std::max(std::sqrt(std::ldexp(1.0, j)) * x_norm(u), linf_l2(u));
}

RVec lp_x_blocks(const SpacetimeField& u, double p) {
    check_p(p);
    if (u.size() == 0) throw std::invalid_argument("lp_x_blocks: empty time axis");
    const auto& spec = u.spec();
    const auto bands = band_densities(u);
    const RVec w = u.time_weights();
    RVec out(bands.size());
    for (std::size_t k = 0; k < bands.size(); ++k)
        out[k] = combine(cube_xj_norms(spec, static_cast<int>(k), bands[k], w), p);
    return out;
}

NormReport lp_xs_norm(const SpacetimeField& u, double s, double p) {
    NormReport r;
    r.name = (p == 1.0 ? "l1" : p == 2.0 ? "l2" : "linf") + std::string("_X^s");
    const RVec b = lp_x_blocks(u, p);
    double sum = 0.0;
    for (int k = 0; k < static_cast<int>(b.size()); ++k) {
        const double v = std::pow(2.0, s * k) * b[k];
        r.per_scale.push_back({k, v});
        sum += v * v;
    }
    r.value = std::sqrt(sum);
    return r;
}

NormReport l1_xs_norm(const SpacetimeField& u, double s) { return lp_xs_norm(u, s, 1.0); }

// ---------------------------------------------------------------- Y surrogate

namespace {

YBracket y_from_densities(const GridSpec& spec, int j, const std::vector<RVec>& rho, const RVec& w) {
    const std::size_t nt = rho.size();
    const double h = spec.cell_volume();
    RVec slice_norm(nt);
    for (std::size_t t = 0; t < nt; ++t) slice_norm[t] = std::sqrt(std::accumulate(rho[t].begin(), rho[t].end(), 0.0) * h);
    YBracket out;
    if (*std::max_element(slice_norm.begin(), slice_norm.end()) == 0.0) return out;

    const double yscale = std::pow(2.0, -0.5 * j);
    const double xscale = std::pow(2.0, 0.5 * j);

    // Upper: slices with the largest L2 norm go to the L1 L2 part first.
    std::vector<std::size_t> order(nt);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return slice_norm[a] > slice_norm[b]; });
    RVec D = time_integrated(rho, w);
    double l1 = 0.0;
    double upper = yscale * ybound_from_density(spec, D);
    for (std::size_t r = 0; r < nt; ++r) {
        const std::size_t t = order[r];
        l1 += w[t] * slice_norm[t];
        if (r + 1 == nt) {
            upper = std::min(upper, l1);
            break;
        }
        for (std::size_t i = 0; i < D.size(); ++i) D[i] = std::max(0.0, D[i] - w[t] * rho[t][i]);
        upper = std::min(upper, yscale * ybound_from_density(spec, D) + l1);
    }
    out.upper = upper;

    // Lower: pair f against a fixed bank built from f itself.
    double lower = 0.0;
    auto xj_of = [&](double x, double linf) { return std::max(xscale * x, linf); };
    const RVec Dfull = time_integrated(rho, w);
    const double total = std::accumulate(Dfull.begin(), Dfull.end(), 0.0) * h;
    {
        const double x = x_from_density(spec, Dfull);
        const double linf = *std::max_element(slice_norm.begin(), slice_norm.end());
        const double denom = xj_of(x, linf);
        if (denom > 0.0) lower = std::max(lower, total / denom);
    }
    // cube-localized copies: the heaviest sharp cube at each level
    const int l0 = base_level(spec);
    RVec Dh(Dfull.size());
    for (std::size_t i = 0; i < Dh.size(); ++i) Dh[i] = Dfull[i] * h;
    const Pyramid py = build_pyramid(spec, base_cells(spec, Dh, l0), l0);
    const int per0 = std::max(1, static_cast<int>(std::lround(std::ldexp(1.0, l0) / spec.spacing())));
    for (std::size_t lvl = 0; lvl < py.sums.size(); ++lvl) {
        const auto& s = py.sums[lvl];
        const std::size_t best = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
        if (s[best] <= 0.0) continue;
        const int count = py.counts[lvl];
        const int per = per0 << lvl;
        auto inside = [&](std::size_t idx) {
            if (spec.d == 1) return static_cast<std::size_t>(static_cast<int>(idx) / per) == best;
            const int i0 = static_cast<int>(idx / spec.n), i1 = static_cast<int>(idx % spec.n);
            return static_cast<std::size_t>(i0 / per) * count + static_cast<std::size_t>(i1 / per) == best;
        };
        RVec Dc(Dfull.size(), 0.0);
        for (std::size_t i = 0; i < Dc.size(); ++i)
            if (inside(i)) Dc[i] = Dfull[i];
        double linf = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
            double m = 0.0;
            for (std::size_t i = 0; i < Dc.size(); ++i)
                if (inside(i)) m += rho[t][i];
            linf = std::max(linf, std::sqrt(m * h));
        }
        const double denom = xj_of(x_from_density(spec, Dc), linf);
        if (denom > 0.0) lower = std::max(lower, s[best] / denom);
    }
    // time-localized copy: the slice with the largest weighted mass
    {
        std::size_t best = 0;
        for (std::size_t t = 1; t < nt; ++t)
            if (w[t] * slice_norm[t] * slice_norm[t] > w[best] * slice_norm[best] * slice_norm[best]) best = t;
        if (w[best] > 0.0) {
            RVec Dt(rho[best].size());
            for (std::size_t i = 0; i < Dt.size(); ++i) Dt[i] = w[best] * rho[best][i];
            const double pairing = w[best] * slice_norm[best] * slice_norm[best];
            const double denom = xj_of(x_from_density(spec, Dt), slice_norm[best]);
            if (denom > 0.0) lower = std::max(lower, pairing / denom);
        }
    }
    out.lower = std::min(lower, out.upper);
    return out;
}

}  // namespace

YBracket y_surrogate(const SpacetimeField& f, int j) {
    if (f.size() == 0) throw std::invalid_argument("y_surrogate: empty time axis");
    return y_from_densities(f.spec(), j, slice_densities(f), f.time_weights());
}

NormReport lp_ys_norm_upper(const SpacetimeField& f, double s, double p) {
    check_p(p);
    const auto& spec = f.spec();
    const auto bands = band_densities(f);
    const RVec w = f.time_weights();
    NormReport r;
    r.name = (p == 1.0 ? "l1" : p == 2.0 ? "l2" : "linf") + std::string("_Y^s_upper");
    double sum = 0.0;
    for (std::size_t k = 0; k < bands.size(); ++k) {
        const auto& cubes = cached_cube_partition(spec, static_cast<int>(k));
        RVec parts(cubes.size());
        for (std::size_t q = 0; q < cubes.size(); ++q) {
            std::vector<RVec> rq(bands[k].size());
            const RVec wq = cubes[q].dense(spec);
            for (std::size_t t = 0; t < rq.size(); ++t) {
                rq[t] = bands[k][t];
                for (std::size_t i = 0; i < rq[t].size(); ++i) rq[t][i] *= wq[i] * wq[i];
            }
            parts[q] = y_from_densities(spec, static_cast<int>(k), rq, w).upper;
        }
        const double v = std::pow(2.0, s * static_cast<double>(k)) * combine(parts, p);
        r.per_scale.push_back({static_cast<int>(k), v});
        sum += v * v;
    }
    r.value = std::sqrt(sum);
    return r;
}

// ---------------------------------------------------------------- envelopes

Envelope make_envelope(const RVec& a, double delta, double sigma) {
    for (double v : a)
        if (!(v >= 0.0)) throw std::invalid_argument("envelope: block norms must be nonnegative");
    Envelope e;
    e.delta = delta;
    e.sigma = sigma;
    const int K = static_cast<int>(a.size());
    e.c.assign(K, 0.0);
    for (int j = 0; j < K; ++j) {
        double c = 0.0;
        for (int k = j; k < K; ++k) c = std::max(c, std::pow(2.0, -delta * (k - j)) * a[k]);
        for (int k = 0; k <= j; ++k) c = std::max(c, std::pow(2.0, -sigma * (j - k)) * a[k]);
        e.c[j] = c;
    }
    return e;
}

EnvelopeCheck check_envelope(const Envelope& env, const RVec& a, double rel_slack) {
    EnvelopeCheck r;
    const auto& c = env.c;
    const int K = static_cast<int>(c.size());
    for (int k = 0; k < K && k < static_cast<int>(a.size()); ++k)
        if (a[k] > c[k] * (1.0 + rel_slack)) r.dominates = false;
    for (int j = 0; j < K; ++j)
        for (int k = 0; k < K; ++k) {
            if (j < k && c[j] < std::pow(2.0, env.delta * (j - k)) * c[k] * (1.0 - rel_slack)) r.left_ok = false;
            if (j > k && c[j] < std::pow(2.0, env.sigma * (k - j)) * c[k] * (1.0 - rel_slack)) r.right_ok = false;
        }
    double sc = 0.0, sa = 0.0;
    for (double v : c) sc += v * v;
    for (double v : a) sa += v * v;
    r.bound = 1.0 / (1.0 - std::pow(2.0, -2.0 * env.delta)) + 1.0 / (1.0 - std::pow(2.0, -2.0 * env.sigma));
    r.square_sum_ratio = sa > 0.0 ? sc / sa : 0.0;
    r.square_sum_ok = sa > 0.0 ? r.square_sum_ratio <= r.bound : sc == 0.0;
    return r;
}

// ---------------------------------------------------------------- probes

std::string estimate_name(EstimateId id) {
    switch (id) {
        case EstimateId::u_squared: return "u_squared";
        case EstimateId::u_squared_plus: return "u_squared+";
        case EstimateId::moser: return "moser";
        case EstimateId::xxy2_plus: return "xxy2+";
        case EstimateId::xxy1_plus: return "xxy1+";
        case EstimateId::xxxy_plus: return "xxxy+";
        case EstimateId::bernstein: return "X-infty";
    }
    return "unknown";
}

namespace {

SpacetimeField pointwise(const SpacetimeField& a, const SpacetimeField& b) {
    std::vector<Field> out;
    out.reserve(a.size());
    for (std::size_t t = 0; t < a.size(); ++t) {
        Field f = a.slice(t);
        const auto& g = b.slice(t);
        for (int c = 0; c < f.m(); ++c)
            simd::active().cmul(f.comp(c).data(), g.comp(std::min(c, g.m() - 1)).data(), f.comp(c).data(), f.comp(c).size());
        out.push_back(std::move(f));
    }
    return SpacetimeField(a.times(), std::move(out));
}

// Returns {lhs, rhs without the T^delta factor}.
std::pair<double, double> evaluate(EstimateId id, const ProbeSample& smp, const ProbeConfig& cfg) {
    const double s = cfg.s, sg = cfg.sigma, dl = cfg.delta;
    const auto& u = smp.u;
    const auto& v = smp.v;
    switch (id) {
        case EstimateId::u_squared_plus: {
            const double lhs = l1_xs_norm(pointwise(u, v), sg).value;
            return {lhs, l1_xs_norm(u, sg).value * l1_xs_norm(v, s).value};
        }
        case EstimateId::u_squared: {
            const double lhs = l1_xs_norm(pointwise(u, v), sg).value;
            return {lhs, l1_xs_norm(u, sg).value * l1_xs_norm(v, s).value + l1_xs_norm(u, s).value * l1_xs_norm(v, sg).value};
        }
        case EstimateId::moser: {
            const SpacetimeField cube = pointwise(pointwise(u, u), u);
            const double us = l1_xs_norm(u, s).value;
            return {l1_xs_norm(cube, sg).value, l1_xs_norm(u, sg).value * us * us};
        }
        case EstimateId::xxy2_plus: {
            const double lhs = lp_ys_norm_upper(pointwise(u, v), sg - dl, 1.0).value;
            return {lhs, l1_xs_norm(u, sg - 1.0).value * l1_xs_norm(v, s - 1.0).value};
        }
        case EstimateId::xxy1_plus: {
            const double lhs = lp_ys_norm_upper(pointwise(u, v), sg - dl, 1.0).value;
            return {lhs, l1_xs_norm(u, sg).value * l1_xs_norm(v, s - 2.0).value};
        }
        case EstimateId::xxxy_plus: {
            const double lhs = lp_ys_norm_upper(pointwise(pointwise(u, v), v), sg - dl, 2.0).value;
            const double vn = lp_xs_norm(v, s - 1.0, 2.0).value;
            return {lhs, lp_xs_norm(u, sg - 1.0, 2.0).value * vn * vn};
        }
        case EstimateId::bernstein: {
            const auto& spec = u.spec();
            const RVec blocks = lp_x_blocks(u, 1.0);
            double best_ratio = 0.0, best_l = 0.0, best_r = 1.0;
            for (int k = 0; k <= spec.k_max(); ++k) {
                double sup = 0.0;
                for (const auto& sl : u.slices()) sup = std::max(sup, lp_project(sl, k).max_abs());
                const double rhs = std::pow(2.0, 0.5 * k * spec.d) * blocks[k];
                if (rhs > 0.0 && sup / rhs > best_ratio) {
                    best_ratio = sup / rhs;
                    best_l = sup;
                    best_r = rhs;
                }
            }
            return {best_l, best_r};
        }
    }
    return {0.0, 0.0};
}

bool uses_T(EstimateId id) {
    return id == EstimateId::xxy2_plus || id == EstimateId::xxy1_plus || id == EstimateId::xxxy_plus;
}

}  // namespace

ProbeResult probe_estimate(EstimateId id, const SampleGenerator& gen, const ProbeConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("probe: trials must be >= 1");
    ProbeResult r;
    r.estimate_id = estimate_name(id);
    std::vector<double> logT, logR;
    for (double T : cfg.T_values) {
        std::mt19937_64 rng(cfg.seed);
        double best = 0.0;
        for (int t = 0; t < cfg.trials; ++t) {
            ProbeSample smp = gen(rng, T);
            const auto [lhs, rhs] = evaluate(id, smp, cfg);
            if (!(rhs > 0.0) || !std::isfinite(rhs)) {
                ++r.skipped;
                continue;
            }
            ++r.sample_count;
            const double ratio = lhs / rhs;
            best = std::max(best, ratio);
            const double tfac = uses_T(id) ? std::pow(T, cfg.delta) : 1.0;
            r.observed_ratio = std::max(r.observed_ratio, ratio / tfac);
        }
        r.ratio_by_T.push_back(best);
        if (best > 0.0) {
            logT.push_back(std::log(T));
            logR.push_back(std::log(best));
        }
    }
    if (logT.size() >= 2) {
        const double mt = std::accumulate(logT.begin(), logT.end(), 0.0) / logT.size();
        const double mr = std::accumulate(logR.begin(), logR.end(), 0.0) / logR.size();
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < logT.size(); ++i) {
            num += (logT[i] - mt) * (logR[i] - mr);
            den += (logT[i] - mt) * (logT[i] - mt);
        }
        r.T_exponent_fit = den > 0.0 ? num / den : 0.0;
    }
    return r;
}

}  // namespace qls
