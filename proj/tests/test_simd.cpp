#include <random>

#include "doctest.h"
#include "qls/simd.hpp"

using qls::simd::cplx;

namespace {

std::vector<cplx> random_vec(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g;
    std::vector<cplx> v(n);
    for (auto& z : v) z = cplx(g(rng), g(rng));
    return v;
}

void check_equivalent(const qls::simd::Kernels& ref, const qls::simd::Kernels& vec) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (std::size_t n : {0u, 1u, 2u, 3u, 17u, 256u, 1001u}) {
        auto a = random_vec(rng, n), b = random_vec(rng, n);
        std::vector<double> w(n);
        for (auto& x : w) x = u(rng);
        std::vector<cplx> o1(n), o2(n);
        ref.cmul(a.data(), b.data(), o1.data(), n);
        vec.cmul(a.data(), b.data(), o2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-14 * (1 + std::abs(o1[i])));
        ref.rmul(w.data(), a.data(), o1.data(), n);
        vec.rmul(w.data(), a.data(), o2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == o2[i]);
        ref.rmul_acc(w.data(), b.data(), o1.data(), n);
        vec.rmul_acc(w.data(), b.data(), o2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-14 * (1 + std::abs(o1[i])));
        o1 = b;
        o2 = b;
        ref.axpy(cplx(0.3, -1.2), a.data(), o1.data(), n);
        vec.axpy(cplx(0.3, -1.2), a.data(), o2.data(), n);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-14 * (1 + std::abs(o1[i])));
        const double scale = 1.0 + static_cast<double>(n);
        CHECK(std::abs(ref.norm2(a.data(), n) - vec.norm2(a.data(), n)) <= 1e-13 * scale);
        CHECK(std::abs(ref.wnorm2(w.data(), a.data(), n) - vec.wnorm2(w.data(), a.data(), n)) <= 1e-13 * scale);
        CHECK(std::abs(ref.rdot(a.data(), b.data(), n) - vec.rdot(a.data(), b.data(), n)) <= 1e-13 * scale);
        CHECK(std::abs(ref.cdot(a.data(), b.data(), n) - vec.cdot(a.data(), b.data(), n)) <= 1e-13 * scale);
    }
}

}  // namespace

TEST_CASE("scalar kernels match naive complex arithmetic") {
    std::mt19937_64 rng(3);
    const auto& k = qls::simd::scalar_kernels();
    auto a = random_vec(rng, 33), b = random_vec(rng, 33);
    std::vector<cplx> o(33);
    k.cmul(a.data(), b.data(), o.data(), 33);
    cplx dot(0, 0);
    double n2 = 0, rd = 0;
    for (int i = 0; i < 33; ++i) {
        CHECK(std::abs(o[i] - a[i] * b[i]) < 1e-14);
        dot += a[i] * b[i];
        n2 += std::norm(a[i]);
        rd += std::real(std::conj(a[i]) * b[i]);
    }
    CHECK(std::abs(k.cdot(a.data(), b.data(), 33) - dot) < 1e-12);
    CHECK(std::abs(k.norm2(a.data(), 33) - n2) < 1e-12);
    CHECK(std::abs(k.rdot(a.data(), b.data(), 33) - rd) < 1e-12);
}

TEST_CASE("vector kernels agree with the scalar reference") {
    const auto& ref = qls::simd::scalar_kernels();
    if (const auto* avx = qls::simd::avx2_kernels(); avx && qls::simd::cpu_supports(qls::simd::Isa::avx2)) {
        check_equivalent(ref, *avx);
    }
    if (const auto* neon = qls::simd::neon_kernels(); neon && qls::simd::cpu_supports(qls::simd::Isa::neon)) {
        check_equivalent(ref, *neon);
    }
    check_equivalent(ref, qls::simd::active());
}

TEST_CASE("dispatch reports a supported isa") {
    CHECK(qls::simd::cpu_supports(qls::simd::active_isa()));
    CHECK(!qls::simd::isa_name(qls::simd::active_isa()).empty());
}
