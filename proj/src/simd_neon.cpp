#include "qls/simd.hpp"

#include <arm_neon.h>

namespace qls::simd {
namespace {

// One complex value per register: [re, im].
inline float64x2_t load(const cplx* p) { return vld1q_f64(reinterpret_cast<const double*>(p)); }
inline void store(cplx* p, float64x2_t v) { vst1q_f64(reinterpret_cast<double*>(p), v); }

inline float64x2_t mul(float64x2_t a, float64x2_t b) {
    const float64x2_t bre = vdupq_laneq_f64(b, 0);
    const float64x2_t bim = vdupq_laneq_f64(b, 1);
    const float64x2_t asw = vextq_f64(a, a, 1);
    const float64x2_t sign = {-1.0, 1.0};
    return vfmaq_f64(vmulq_f64(a, bre), vmulq_f64(asw, bim), sign);
}

void cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) store(out + i, mul(load(a + i), load(b + i)));
}

void rmul(const double* w, const cplx* a, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) store(out + i, vmulq_n_f64(load(a + i), w[i]));
}

void rmul_acc(const double* w, const cplx* a, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) store(out + i, vfmaq_n_f64(load(out + i), load(a + i), w[i]));
}

void axpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
    const float64x2_t av = {alpha.real(), alpha.imag()};
    for (std::size_t i = 0; i < n; ++i) store(y + i, vaddq_f64(load(y + i), mul(load(x + i), av)));
}

double norm2(const cplx* a, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const float64x2_t v = load(a + i);
        acc = vfmaq_f64(acc, v, v);
    }
    return vaddvq_f64(acc);
}

double wnorm2(const double* w, const cplx* a, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const float64x2_t v = load(a + i);
        acc = vfmaq_n_f64(acc, vmulq_f64(v, v), w[i]);
    }
    return vaddvq_f64(acc);
}

double rdot(const cplx* a, const cplx* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < n; ++i) acc = vfmaq_f64(acc, load(a + i), load(b + i));
    return vaddvq_f64(acc);
}

cplx cdot(const cplx* a, const cplx* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t i = 0; i < n; ++i) acc = vaddq_f64(acc, mul(load(a + i), load(b + i)));
    return {vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1)};
}

}  // namespace

const Kernels* neon_kernels() {
    static const Kernels k{cmul, rmul, rmul_acc, axpy, norm2, wnorm2, rdot, cdot};
    return &k;
}

}  // namespace qls::simd
