#include "qls/simd.hpp"

#include <immintrin.h>

namespace qls::simd {
namespace {

// Two complex values per register: [re0, im0, re1, im1].
inline __m256d load(const cplx* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }
inline void store(cplx* p, __m256d v) { _mm256_storeu_pd(reinterpret_cast<double*>(p), v); }

inline __m256d mul(__m256d a, __m256d b) {
    const __m256d bre = _mm256_movedup_pd(b);
    const __m256d bim = _mm256_permute_pd(b, 0xF);
    const __m256d asw = _mm256_permute_pd(a, 0x5);
    return _mm256_fmaddsub_pd(a, bre, _mm256_mul_pd(asw, bim));
}

// [w0, w0, w1, w1]
inline __m256d dup_weights(const double* w) {
    const __m256d v = _mm256_castpd128_pd256(_mm_loadu_pd(w));
    return _mm256_permute4x64_pd(v, 0x50);
}

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) store(out + i, mul(load(a + i), load(b + i)));
    if (i < n) out[i] = a[i] * b[i];
}

void rmul(const double* w, const cplx* a, cplx* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) store(out + i, _mm256_mul_pd(dup_weights(w + i), load(a + i)));
    if (i < n) out[i] = w[i] * a[i];
}

void rmul_acc(const double* w, const cplx* a, cplx* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        store(out + i, _mm256_fmadd_pd(dup_weights(w + i), load(a + i), load(out + i)));
    if (i < n) out[i] += w[i] * a[i];
}

void axpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
    const __m256d ar = _mm256_set1_pd(alpha.real());
    const __m256d ai = _mm256_set1_pd(alpha.imag());
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d xv = load(x + i);
        const __m256d xs = _mm256_permute_pd(xv, 0x5);
        const __m256d p = _mm256_fmaddsub_pd(xv, ar, _mm256_mul_pd(xs, ai));
        store(y + i, _mm256_add_pd(load(y + i), p));
    }
    if (i < n) y[i] += alpha * x[i];
}

double norm2(const cplx* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d v = load(a + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double s = hsum(acc);
    if (i < n) s += std::norm(a[i]);
    return s;
}

double wnorm2(const double* w, const cplx* a, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const __m256d v = load(a + i);
        acc = _mm256_fmadd_pd(dup_weights(w + i), _mm256_mul_pd(v, v), acc);
    }
    double s = hsum(acc);
    if (i < n) s += w[i] * std::norm(a[i]);
    return s;
}

double rdot(const cplx* a, const cplx* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = _mm256_fmadd_pd(load(a + i), load(b + i), acc);
    double s = hsum(acc);
    if (i < n) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s;
}

cplx cdot(const cplx* a, const cplx* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = _mm256_add_pd(acc, mul(load(a + i), load(b + i)));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    cplx s(lanes[0] + lanes[2], lanes[1] + lanes[3]);
    if (i < n) s += a[i] * b[i];
    return s;
}

}  // namespace

const Kernels* avx2_kernels() {
    static const Kernels k{cmul, rmul, rmul_acc, axpy, norm2, wnorm2, rdot, cdot};
    return &k;
}

}  // namespace qls::simd
