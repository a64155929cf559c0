#include "qls/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>

#include "qls/cutoff.hpp"
#include "qls/simd.hpp"

namespace qls {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int ilog2(int n) {
    int k = 0;
    while ((1 << (k + 1)) <= n) ++k;
    return k;
}

}  // namespace

// ---------------------------------------------------------------- GridSpec

double GridSpec::period() const { return std::ldexp(1.0, J); }
double GridSpec::spacing() const { return period() / n; }
double GridSpec::cell_volume() const { return d == 1 ? spacing() : spacing() * spacing(); }
std::size_t GridSpec::size() const {
    return d == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
}
int GridSpec::k_max() const { return ilog2(n) - 1 - J; }

void GridSpec::validate() const {
    if (d != 1 && d != 2) throw std::invalid_argument("grid: d must be 1 or 2");
    if (!is_pow2(n) || n < 4) throw std::invalid_argument("grid: n must be a power of two >= 4");
    if (k_max() < 0) throw std::invalid_argument("grid: n too small to resolve band 0 (need n >= 2^(J+1))");
}

Vec2 GridSpec::coord(std::size_t idx) const {
    const double h = spacing();
    const double lo = -0.5 * period();
    if (d == 1) return {lo + h * static_cast<double>(idx), 0.0};
    const std::size_t i0 = idx / n, i1 = idx % n;
    return {lo + h * static_cast<double>(i0), lo + h * static_cast<double>(i1)};
}

std::size_t GridSpec::index(int i0, int i1) const {
    auto wrap = [this](int i) { return ((i % n) + n) % n; };
    if (d == 1) return static_cast<std::size_t>(wrap(i0));
    return static_cast<std::size_t>(wrap(i0)) * n + static_cast<std::size_t>(wrap(i1));
}

// ---------------------------------------------------------------- Field

Field::Field(const GridSpec& spec, int m) : spec_(spec) {
    spec_.validate();
    if (m < 1) throw std::invalid_argument("field: component count must be >= 1");
    comps_.assign(m, CVec(spec_.size(), cplx(0.0, 0.0)));
}

Field::Field(const GridSpec& spec, std::vector<CVec> comps) : spec_(spec), comps_(std::move(comps)) {
    spec_.validate();
    if (comps_.empty()) throw std::invalid_argument("field: component count must be >= 1");
    for (const auto& c : comps_)
        if (c.size() != spec_.size()) throw std::invalid_argument("field: sample count does not match grid");
}

Field Field::from_function(const GridSpec& spec, const std::function<cplx(const Vec2&)>& f) {
    Field out(spec, 1);
    auto& c = out.comp();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = f(spec.coord(i));
    return out;
}

bool Field::finite() const {
    for (const auto& c : comps_)
        for (const auto& z : c)
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    return true;
}

double Field::l2() const {
    double s = 0.0;
    for (const auto& c : comps_) s += simd::active().norm2(c.data(), c.size());
    return std::sqrt(s * spec_.cell_volume());
}

double Field::max_abs() const {
    double s = 0.0;
    for (const auto& c : comps_)
        for (const auto& z : c) s = std::max(s, std::abs(z));
    return s;
}

void Field::check_compatible(const Field& o) const {
    if (spec_ != o.spec_ || m() != o.m()) throw std::invalid_argument("field: incompatible operands");
}

Field& Field::operator+=(const Field& o) {
    check_compatible(o);
    for (int c = 0; c < m(); ++c)
        simd::active().axpy(cplx(1.0, 0.0), o.comps_[c].data(), comps_[c].data(), comps_[c].size());
    return *this;
}

Field& Field::operator-=(const Field& o) {
    check_compatible(o);
    for (int c = 0; c < m(); ++c)
        simd::active().axpy(cplx(-1.0, 0.0), o.comps_[c].data(), comps_[c].data(), comps_[c].size());
    return *this;
}

Field& Field::operator*=(cplx a) {
    for (auto& c : comps_)
        for (auto& z : c) z *= a;
    return *this;
}

FrequencyField::FrequencyField(const GridSpec& spec, std::vector<CVec> comps)
    : spec_(spec), comps_(std::move(comps)) {
    spec_.validate();
    for (const auto& c : comps_)
        if (c.size() != spec_.size()) throw std::invalid_argument("frequency field: size mismatch");
}

double FrequencyField::l2() const {
    double s = 0.0;
    for (const auto& c : comps_) s += simd::active().norm2(c.data(), c.size());
    return std::sqrt(s * spec_.cell_volume());
}

// ---------------------------------------------------------------- SpacetimeField

SpacetimeField::SpacetimeField(std::vector<double> times, std::vector<Field> slices)
    : times_(std::move(times)), slices_(std::move(slices)) {
    if (times_.empty()) throw std::invalid_argument("spacetime field: empty time axis");
    if (times_.size() != slices_.size()) throw std::invalid_argument("spacetime field: time/slice count mismatch");
    for (std::size_t i = 1; i < slices_.size(); ++i)
        if (slices_[i].spec() != slices_[0].spec() || slices_[i].m() != slices_[0].m())
            throw std::invalid_argument("spacetime field: slices must share one grid");
    if (times_.size() > 1) {
        const double step = (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
        if (!(step > 0.0)) throw std::invalid_argument("spacetime field: times must increase");
        for (std::size_t i = 1; i < times_.size(); ++i) {
            const double di = times_[i] - times_[i - 1];
            if (!(di > 0.0) || std::abs(di - step) > 1e-9 * std::max(1.0, step))
                throw std::invalid_argument("spacetime field: time step must be uniform");
        }
    }
}

SpacetimeField SpacetimeField::zeros(const GridSpec& spec, int m, double T, int steps) {
    std::vector<double> t(steps + 1);
    for (int i = 0; i <= steps; ++i) t[i] = T * i / steps;
    return SpacetimeField(std::move(t), std::vector<Field>(steps + 1, Field(spec, m)));
}

SpacetimeField SpacetimeField::constant_in_time(const Field& f, double T, int steps) {
    std::vector<double> t(steps + 1);
    for (int i = 0; i <= steps; ++i) t[i] = T * i / steps;
    return SpacetimeField(std::move(t), std::vector<Field>(steps + 1, f));
}

const GridSpec& SpacetimeField::spec() const {
    if (slices_.empty()) throw std::invalid_argument("spacetime field: empty time axis");
    return slices_.front().spec();
}

double SpacetimeField::dt() const {
    if (times_.size() < 2) return 0.0;
    return (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
}

double SpacetimeField::T() const { return times_.empty() ? 0.0 : times_.back() - times_.front(); }

RVec SpacetimeField::time_weights() const {
    RVec w(times_.size(), 0.0);
    if (times_.size() < 2) return w;
    const double h = dt();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = h;
    w.front() *= 0.5;
    w.back() *= 0.5;
    return w;
}

// ---------------------------------------------------------------- tables

double lp_symbol(int k, double nu, int k_max) {
    if (k < 0 || k > k_max) return 0.0;
    auto low = [nu](int j) { return lp_profile(nu / std::ldexp(1.0, j)); };
    if (k_max == 0) return 1.0;
    if (k == 0) return low(0);
    if (k == k_max) return 1.0 - low(k - 1);
    return low(k) - low(k - 1);
}

double lp_range_symbol(int k1, int k2, double nu, int k_max) {
    k1 = std::max(k1, 0);
    k2 = std::min(k2, k_max);
    if (k1 > k2) return 0.0;
    auto low = [nu, k_max](int j) { return j >= k_max ? 1.0 : lp_profile(nu / std::ldexp(1.0, j)); };
    const double upper = low(k2);
    const double lower = k1 == 0 ? 0.0 : low(k1 - 1);
    return upper - lower;
}

namespace {

std::unique_ptr<SpectralTables> build_tables(const GridSpec& spec) {
    auto t = std::make_unique<SpectralTables>();
    t->spec = spec;
    const std::size_t N = spec.size();
    const int n = spec.n;
    const double P = spec.period();
    auto wave = [n, P](int i) {
        const int m = i < n / 2 ? i : i - n;
        return 2.0 * std::numbers::pi * m / P;
    };
    t->xi.assign(spec.d, RVec(N));
    t->xi_odd.assign(spec.d, RVec(N));
    t->nu.assign(N, 0.0);
    t->laplacian.assign(N, 0.0);
    for (std::size_t idx = 0; idx < N; ++idx) {
        int ii[2] = {0, 0};
        if (spec.d == 1) {
            ii[0] = static_cast<int>(idx);
        } else {
            ii[0] = static_cast<int>(idx / n);
            ii[1] = static_cast<int>(idx % n);
        }
        double r2 = 0.0;
        for (int a = 0; a < spec.d; ++a) {
            const double k = wave(ii[a]);
            t->xi[a][idx] = k;
            t->xi_odd[a][idx] = ii[a] == n / 2 ? 0.0 : k;
            r2 += k * k;
        }
        t->laplacian[idx] = -r2;
        t->nu[idx] = std::sqrt(r2) / (2.0 * std::numbers::pi);
    }
    const int kmax = spec.k_max();
    t->band.assign(kmax + 1, RVec(N));
    for (int k = 0; k <= kmax; ++k)
        for (std::size_t idx = 0; idx < N; ++idx) t->band[k][idx] = lp_symbol(k, t->nu[idx], kmax);
    return t;
}

struct PlanKey {
    int d, n, sign;
    bool inplace;
    bool operator<(const PlanKey& o) const {
        return std::tie(d, n, sign, inplace) < std::tie(o.d, o.n, o.sign, o.inplace);
    }
};

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan get_plan(const GridSpec& spec, int sign, bool inplace) {
    static std::map<PlanKey, fftw_plan> plans;
    std::lock_guard<std::mutex> lock(plan_mutex());
    const PlanKey key{spec.d, spec.n, sign, inplace};
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    const std::size_t N = spec.size();
    auto* a = fftw_alloc_complex(N);
    auto* b = inplace ? a : fftw_alloc_complex(N);
    int dims[2] = {spec.n, spec.n};
    fftw_plan p = fftw_plan_dft(spec.d, dims, a, b, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (b != a) fftw_free(b);
    fftw_free(a);
    if (p == nullptr) throw std::runtime_error("fft: planning failed");
    plans.emplace(key, p);
    return p;
}

void execute(const GridSpec& spec, const cplx* in, cplx* out, int sign) {
    const bool inplace = in == out;
    fftw_plan p = get_plan(spec, sign, inplace);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace

const SpectralTables& spectral_tables(const GridSpec& spec) {
    static std::map<std::tuple<int, int, int>, std::unique_ptr<SpectralTables>> cache;
    static std::mutex m;
    std::lock_guard<std::mutex> lock(m);
    auto key = std::make_tuple(spec.d, spec.n, spec.J);
    auto it = cache.find(key);
    if (it == cache.end()) {
        spec.validate();
        it = cache.emplace(key, build_tables(spec)).first;
    }
    return *it->second;
}

namespace fft {

void forward(const GridSpec& spec, const cplx* in, cplx* out) { execute(spec, in, out, FFTW_FORWARD); }

void inverse(const GridSpec& spec, const cplx* in, cplx* out) {
    execute(spec, in, out, FFTW_BACKWARD);
    const double s = 1.0 / static_cast<double>(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) out[i] *= s;
}

CVec forward(const GridSpec& spec, const CVec& in) {
    if (in.size() != spec.size()) throw std::invalid_argument("fft: size mismatch");
    CVec out(in.size());
    forward(spec, in.data(), out.data());
    return out;
}

CVec inverse(const GridSpec& spec, const CVec& in) {
    if (in.size() != spec.size()) throw std::invalid_argument("fft: size mismatch");
    CVec out(in.size());
    inverse(spec, in.data(), out.data());
    return out;
}

}  // namespace fft

// ---------------------------------------------------------------- transforms

FrequencyField to_frequency(const Field& f) {
    const auto& spec = f.spec();
    const double s = 1.0 / std::sqrt(static_cast<double>(spec.size()));
    std::vector<CVec> comps;
    comps.reserve(f.m());
    for (const auto& c : f.comps()) {
        CVec out = fft::forward(spec, c);
        for (auto& z : out) z *= s;
        comps.push_back(std::move(out));
    }
    return FrequencyField(spec, std::move(comps));
}

Field from_frequency(const FrequencyField& f) {
    const auto& spec = f.spec();
    const double s = std::sqrt(static_cast<double>(spec.size()));
    std::vector<CVec> comps;
    comps.reserve(f.m());
    for (int c = 0; c < f.m(); ++c) {
        CVec out = fft::inverse(spec, f.comp(c));
        for (auto& z : out) z *= s;
        comps.push_back(std::move(out));
    }
    return Field(spec, std::move(comps));
}

CVec spectral_derivative(const GridSpec& spec, const CVec& f, int axis) {
    if (axis < 0 || axis >= spec.d) throw std::invalid_argument("derivative: axis out of range");
    if (f.size() != spec.size()) throw std::invalid_argument("derivative: size mismatch");
    const auto& t = spectral_tables(spec);
    CVec hat = fft::forward(spec, f);
    const auto& k = t.xi_odd[axis];
    for (std::size_t i = 0; i < hat.size(); ++i) hat[i] = cplx(-k[i] * hat[i].imag(), k[i] * hat[i].real());
    fft::inverse(spec, hat.data(), hat.data());
    return hat;
}

Field spectral_derivative(const Field& f, int axis) {
    std::vector<CVec> comps;
    for (const auto& c : f.comps()) comps.push_back(spectral_derivative(f.spec(), c, axis));
    return Field(f.spec(), std::move(comps));
}

CVec lp_project_range(const GridSpec& spec, const CVec& f, int k1, int k2) {
    if (f.size() != spec.size()) throw std::invalid_argument("lp: size mismatch");
    const auto& t = spectral_tables(spec);
    const int kmax = spec.k_max();
    RVec mask(spec.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = lp_range_symbol(k1, k2, t.nu[i], kmax);
    CVec hat = fft::forward(spec, f);
    simd::active().rmul(mask.data(), hat.data(), hat.data(), hat.size());
    fft::inverse(spec, hat.data(), hat.data());
    return hat;
}

CVec lp_project(const GridSpec& spec, const CVec& f, int k) {
    if (k < 0) throw std::invalid_argument("lp: k must be >= 0");
    if (k > spec.k_max()) return CVec(spec.size(), cplx(0.0, 0.0));
    const auto& t = spectral_tables(spec);
    CVec hat = fft::forward(spec, f);
    simd::active().rmul(t.band[k].data(), hat.data(), hat.data(), hat.size());
    fft::inverse(spec, hat.data(), hat.data());
    return hat;
}

Field lp_project(const Field& f, int k) {
    std::vector<CVec> comps;
    for (const auto& c : f.comps()) comps.push_back(lp_project(f.spec(), c, k));
    return Field(f.spec(), std::move(comps));
}

Field lp_project_range(const Field& f, int k1, int k2) {
    std::vector<CVec> comps;
    for (const auto& c : f.comps()) comps.push_back(lp_project_range(f.spec(), c, k1, k2));
    return Field(f.spec(), std::move(comps));
}

// ---------------------------------------------------------------- cubes

namespace {

double cube_bump(double t) {
    const double a = 1.0 - t * t;
    return a > 0.0 ? std::exp(-1.0 / a) : 0.0;
}

// Normalized 1-d weights for `count` cubes of side `side` on a periodic axis.
std::vector<RVec> axis_weights(const GridSpec& spec, int count, double side) {
    const int n = spec.n;
    const double P = spec.period();
    const double lo = -0.5 * P;
    const double h = spec.spacing();
    std::vector<RVec> w(count, RVec(n, 0.0));
    for (int i = 0; i < n; ++i) {
        const double x = lo + h * i;
        double total = 0.0;
        for (int q = 0; q < count; ++q) {
            const double c = lo + side * (q + 0.5);
            double dx = std::remainder(x - c, P);
            w[q][i] = cube_bump(dx / side);
            total += w[q][i];
        }
        for (int q = 0; q < count; ++q) w[q][i] /= total;
    }
    return w;
}

}  // namespace

double Cube::weight_at(const GridSpec& spec, std::size_t idx) const {
    if (spec.d == 1) return axis_weight[0][idx];
    return axis_weight[0][idx / spec.n] * axis_weight[1][idx % spec.n];
}

RVec Cube::dense(const GridSpec& spec) const {
    RVec out(spec.size(), 0.0);
    if (spec.d == 1) {
        for (int i : support[0]) out[i] = axis_weight[0][i];
        return out;
    }
    for (int i0 : support[0])
        for (int i1 : support[1])
            out[static_cast<std::size_t>(i0) * spec.n + i1] = axis_weight[0][i0] * axis_weight[1][i1];
    return out;
}

double Cube::weighted_sum_sq(const GridSpec& spec, const RVec& density) const {
    double s = 0.0;
    if (spec.d == 1) {
        for (int i : support[0]) s += axis_weight[0][i] * axis_weight[0][i] * density[i];
        return s;
    }
    for (int i0 : support[0]) {
        const double a = axis_weight[0][i0] * axis_weight[0][i0];
        const double* row = density.data() + static_cast<std::size_t>(i0) * spec.n;
        double r = 0.0;
        for (int i1 : support[1]) r += axis_weight[1][i1] * axis_weight[1][i1] * row[i1];
        s += a * r;
    }
    return s;
}

std::vector<Cube> cube_partition(const GridSpec& spec, int j) {
    spec.validate();
    if (j < 0) throw std::invalid_argument("cube partition: j must be >= 0");
    const int n = spec.n;
    auto support_of = [n](const RVec& w) {
        std::vector<int> s;
        for (int i = 0; i < n; ++i)
            if (w[i] > 0.0) s.push_back(i);
        return s;
    };
    std::vector<Cube> cubes;
    if (j >= spec.J) {
        Cube c;
        for (int a = 0; a < 2; ++a) {
            c.axis_weight[a].assign(a < spec.d ? n : 1, 1.0);
            c.support[a] = a < spec.d ? support_of(c.axis_weight[a]) : std::vector<int>{0};
        }
        cubes.push_back(std::move(c));
        return cubes;
    }
    const int count = 1 << (spec.J - j);
    const double side = std::ldexp(1.0, j);
    const double lo = -0.5 * spec.period();
    const auto w = axis_weights(spec, count, side);
    std::vector<std::vector<int>> sup(count);
    for (int q = 0; q < count; ++q) sup[q] = support_of(w[q]);
    if (spec.d == 1) {
        for (int q = 0; q < count; ++q) {
            Cube c;
            c.id = q;
            c.index = {q, 0};
            c.center = {lo + side * (q + 0.5), 0.0};
            c.axis_weight = {w[q], RVec{1.0}};
            c.support = {sup[q], std::vector<int>{0}};
            cubes.push_back(std::move(c));
        }
        return cubes;
    }
    for (int q0 = 0; q0 < count; ++q0) {
        for (int q1 = 0; q1 < count; ++q1) {
            Cube c;
            c.id = q0 * count + q1;
            c.index = {q0, q1};
            c.center = {lo + side * (q0 + 0.5), lo + side * (q1 + 0.5)};
            c.axis_weight = {w[q0], w[q1]};
            c.support = {sup[q0], sup[q1]};
            cubes.push_back(std::move(c));
        }
    }
    return cubes;
}

const std::vector<Cube>& cached_cube_partition(const GridSpec& spec, int j) {
    static std::map<std::tuple<int, int, int, int>, std::unique_ptr<std::vector<Cube>>> cache;
    static std::mutex m;
    j = std::min(j, spec.J);
    std::lock_guard<std::mutex> lock(m);
    auto key = std::make_tuple(spec.d, spec.n, spec.J, j);
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, std::make_unique<std::vector<Cube>>(cube_partition(spec, j))).first;
    return *it->second;
}

}  // namespace qls
