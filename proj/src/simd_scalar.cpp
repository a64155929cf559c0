#include "qls/simd.hpp"

namespace qls::simd {
namespace {

void cmul(const cplx* a, const cplx* b, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double ar = a[i].real(), ai = a[i].imag();
        const double br = b[i].real(), bi = b[i].imag();
        out[i] = cplx(ar * br - ai * bi, ar * bi + ai * br);
    }
}

void rmul(const double* w, const cplx* a, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = cplx(w[i] * a[i].real(), w[i] * a[i].imag());
}

void rmul_acc(const double* w, const cplx* a, cplx* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = cplx(out[i].real() + w[i] * a[i].real(), out[i].imag() + w[i] * a[i].imag());
}

void axpy(cplx alpha, const cplx* x, cplx* y, std::size_t n) {
    const double ar = alpha.real(), ai = alpha.imag();
    for (std::size_t i = 0; i < n; ++i) {
        const double xr = x[i].real(), xi = x[i].imag();
        y[i] = cplx(y[i].real() + ar * xr - ai * xi, y[i].imag() + ar * xi + ai * xr);
    }
}

double norm2(const cplx* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i].real() * a[i].real() + a[i].imag() * a[i].imag();
    return s;
}

double wnorm2(const double* w, const cplx* a, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        s += w[i] * (a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
    return s;
}

double rdot(const cplx* a, const cplx* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    return s;
}

cplx cdot(const cplx* a, const cplx* b, std::size_t n) {
    double sr = 0.0, si = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sr += a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
        si += a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
    }
    return {sr, si};
}

}  // namespace

const Kernels& scalar_kernels() {
    static const Kernels k{cmul, rmul, rmul_acc, axpy, norm2, wnorm2, rdot, cdot};
    return k;
}

}  // namespace qls::simd
