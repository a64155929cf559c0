#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "qls/spectral.hpp"

using namespace qls;
using std::numbers::pi;

namespace {

Field random_field(const GridSpec& spec, std::mt19937_64& rng, int m = 1) {
    std::normal_distribution<double> g;
    Field f(spec, m);
    for (auto& c : f.comps())
        for (auto& z : c) z = cplx(g(rng), g(rng));
    return f;
}

double max_diff(const CVec& a, const CVec& b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
    return e;
}

// Direct O(N^2) unitary DFT over grid indices, independent of the FFT library.
CVec direct_dft_1d(const CVec& f) {
    const std::size_t n = f.size();
    CVec out(n);
    for (std::size_t m = 0; m < n; ++m) {
        cplx s(0, 0);
        for (std::size_t i = 0; i < n; ++i) s += f[i] * std::polar(1.0, -2.0 * pi * double(m * i % n) / n);
        out[m] = s / std::sqrt(double(n));
    }
    return out;
}

}  // namespace

TEST_CASE("grid spec validation and geometry") {
    GridSpec s{1, 256, 3};
    CHECK_NOTHROW(s.validate());
    CHECK(s.period() == 8.0);
    CHECK(s.k_max() == 4);
    CHECK(s.coord(0)[0] == -4.0);
    CHECK_THROWS(GridSpec{1, 100, 3}.validate());
    CHECK_THROWS(GridSpec{3, 64, 3}.validate());
    CHECK_THROWS(GridSpec{1, 8, 3}.validate());
    CHECK_THROWS(Field(s, std::vector<CVec>{CVec(10)}));
}

TEST_CASE("round trip and Plancherel") {
    std::mt19937_64 rng(1);
    for (GridSpec s : {GridSpec{1, 256, 3}, GridSpec{2, 64, 2}}) {
        Field f = random_field(s, rng, 2);
        FrequencyField fh = to_frequency(f);
        Field g = from_frequency(fh);
        for (int c = 0; c < 2; ++c) CHECK(max_diff(f.comp(c), g.comp(c)) <= 1e-12);
        CHECK(std::abs(fh.l2() - f.l2()) <= 1e-12 * f.l2());
    }
}

TEST_CASE("constant field has all its mass at mode zero") {
    GridSpec s{1, 64, 2};
    Field one = Field::from_function(s, [](const Vec2&) { return cplx(1, 0); });
    FrequencyField fh = to_frequency(one);
    CHECK(std::abs(fh.comp()[0] - std::sqrt(64.0)) < 1e-12);
    for (std::size_t i = 1; i < 64; ++i) CHECK(std::abs(fh.comp()[i]) < 1e-12);
}

TEST_CASE("Gaussian transform matches the periodized closed form") {
    GridSpec s{1, 128, 4};
    const double P = s.period(), h = s.spacing(), w = 0.7;
    Field f = Field::from_function(s, [&](const Vec2& x) {
        double v = 0;
        for (int p = -3; p <= 3; ++p) v += std::exp(-std::pow(x[0] - p * P, 2) / (2 * w * w));
        return cplx(v, 0);
    });
    FrequencyField fh = to_frequency(f);
    double err = 0;
    for (int i = 0; i < s.n; ++i) {
        const int m = i < s.n / 2 ? i : i - s.n;
        const double xi = 2 * pi * m / P;
        double sum = 0;
        for (int q = -3; q <= 3; ++q) {
            const double k = xi + 2 * pi * q / h;
            sum += w * std::sqrt(2 * pi) * std::exp(-k * k * w * w / 2);
        }
        const cplx expected = std::polar(1.0, xi * P / 2) * sum / h / std::sqrt(double(s.n));
        err = std::max(err, std::abs(expected - fh.comp()[i]));
    }
    CHECK(err <= 1e-8);
}

TEST_CASE("spectral derivative") {
    GridSpec s{2, 32, 3};
    const double P = s.period();
    const double k0 = 2 * pi * 3 / P, k1 = -2 * pi * 5 / P;
    Field e = Field::from_function(s, [&](const Vec2& x) { return std::polar(1.0, k0 * x[0] + k1 * x[1]); });
    Field d0 = spectral_derivative(e, 0), d1 = spectral_derivative(e, 1);
    double err = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        err = std::max(err, std::abs(d0.comp()[i] - cplx(0, k0) * e.comp()[i]));
        err = std::max(err, std::abs(d1.comp()[i] - cplx(0, k1) * e.comp()[i]));
    }
    CHECK(err <= 1e-10);

    GridSpec s1{1, 64, 3};
    Field c = Field::from_function(s1, [](const Vec2&) { return cplx(2.5, 0); });
    CHECK(spectral_derivative(c, 0).max_abs() <= 1e-12);
    const double P1 = s1.period();
    Field sn = Field::from_function(s1, [&](const Vec2& x) { return cplx(std::sin(2 * pi * x[0] / P1), 0); });
    Field ds = spectral_derivative(sn, 0);
    double e2 = 0;
    for (std::size_t i = 0; i < s1.size(); ++i) {
        const double x = s1.coord(i)[0];
        e2 = std::max(e2, std::abs(ds.comp()[i] - (2 * pi / P1) * std::cos(2 * pi * x / P1)));
    }
    CHECK(e2 <= 1e-10);
    CHECK_THROWS(spectral_derivative(sn, 1));
}

TEST_CASE("Littlewood-Paley partition of unity and disjointness") {
    std::mt19937_64 rng(5);
    for (GridSpec s : {GridSpec{1, 256, 3}, GridSpec{2, 64, 1}}) {
        Field f = random_field(s, rng);
        CVec sum(s.size(), cplx(0, 0));
        std::vector<CVec> pieces;
        for (int k = 0; k <= s.k_max(); ++k) {
            pieces.push_back(lp_project(s, f.comp(), k));
            for (std::size_t i = 0; i < s.size(); ++i) sum[i] += pieces.back()[i];
        }
        CHECK(max_diff(sum, f.comp()) <= 1e-11);
        for (int j = 0; j <= s.k_max(); ++j)
            for (int k = j + 2; k <= s.k_max(); ++k)
                CHECK(max_diff(lp_project(s, pieces[j], k), CVec(s.size())) <= 1e-12);
        // ranged projection equals the sum of its bands
        CVec r = lp_project_range(s, f.comp(), 1, 2);
        CVec r2(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) r2[i] = pieces[1][i] + pieces[2][i];
        CHECK(max_diff(r, r2) <= 1e-11);
    }
}

TEST_CASE("band center mode passes S_k and is killed by S_{k+-2}") {
    GridSpec s{1, 256, 2};  // k_max = 5
    for (int k = 0; k <= s.k_max(); ++k) {
        const double nu = std::ldexp(1.0, k);
        Field e = Field::from_function(s, [&](const Vec2& x) { return std::polar(1.0, 2 * pi * nu * x[0]); });
        CHECK(max_diff(lp_project(s, e.comp(), k), e.comp()) <= 1e-12);
        if (k >= 2) CHECK(max_diff(lp_project(s, e.comp(), k - 2), CVec(s.size())) <= 1e-12);
        if (k + 2 <= s.k_max()) CHECK(max_diff(lp_project(s, e.comp(), k + 2), CVec(s.size())) <= 1e-12);
    }
}

TEST_CASE("dyadic pieces of a Gaussian match a direct masked-transform oracle") {
    GridSpec s{1, 256, 3};
    Field f = Field::from_function(s, [](const Vec2& x) { return cplx(std::exp(-4 * x[0] * x[0]), 0); });
    CVec fh = direct_dft_1d(f.comp());
    for (int k = 0; k <= s.k_max(); ++k) {
        double mass = 0;
        for (int i = 0; i < s.n; ++i) {
            const int m = i < s.n / 2 ? i : i - s.n;
            const double nu = std::abs(m) / s.period();
            double sym;
            // independent restatement of the band symbol
            auto psi = [](double r) { return r <= 1 ? 1.0 : r >= 2 ? 0.0 : 0.5 * (1 + std::cos(pi * std::log2(r))); };
            if (k == 0) sym = psi(nu);
            else if (k == s.k_max()) sym = 1 - psi(nu / std::ldexp(1.0, k - 1));
            else sym = psi(nu / std::ldexp(1.0, k)) - psi(nu / std::ldexp(1.0, k - 1));
            mass += std::norm(sym * fh[i]);
        }
        const double expected = std::sqrt(mass * s.cell_volume());
        const double got = Field(s, {lp_project(s, f.comp(), k)}).l2();
        CHECK(std::abs(got - expected) <= 1e-10);
    }
}

TEST_CASE("cube partition") {
    for (GridSpec s : {GridSpec{1, 128, 4}, GridSpec{2, 64, 3}}) {
        for (int j = 0; j <= s.J + 1; ++j) {
            auto cubes = cube_partition(s, j);
            RVec total(s.size(), 0.0);
            for (const auto& c : cubes) {
                RVec w = c.dense(s);
                for (std::size_t i = 0; i < s.size(); ++i) {
                    CHECK(w[i] >= 0.0);
                    total[i] += w[i];
                    CHECK(w[i] == doctest::Approx(c.weight_at(s, i)).epsilon(1e-15));
                    if (w[i] > 0) {
                        // support inside the 2-dilated cube (periodic distance)
                        const Vec2 x = s.coord(i);
                        const double side = std::ldexp(1.0, j);
                        for (int a = 0; a < s.d && j < s.J; ++a)
                            CHECK(std::abs(std::remainder(x[a] - c.center[a], s.period())) <= side + 1e-12);
                    }
                }
            }
            for (double t : total) CHECK(std::abs(t - 1.0) <= 1e-12);
            if (j >= s.J) {
                CHECK(cubes.size() == 1);
            }
        }
    }
    GridSpec s{1, 128, 4};
    auto cubes = cube_partition(s, s.J - 2);
    CHECK(cubes.size() == 4);
    const double side = std::ldexp(1.0, s.J - 2);
    for (const auto& c : cubes) {
        RVec w = c.dense(s);
        // direct support scan: extent of the positive set is below 2 * side
        int count = 0;
        for (double v : w) count += v > 0;
        CHECK(count * s.spacing() <= 2 * side);
    }
}
