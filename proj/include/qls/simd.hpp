#pragma once

#include <complex>
#include <cstddef>
#include <string>

namespace qls::simd {

using cplx = std::complex<double>;

// Kernel table. Every entry has a scalar reference implementation; vector
// variants must agree with it to rounding (reductions may reassociate).
struct Kernels {
    // out[i] = a[i] * b[i]
    void (*cmul)(const cplx* a, const cplx* b, cplx* out, std::size_t n);
    // out[i] = w[i] * a[i]
    void (*rmul)(const double* w, const cplx* a, cplx* out, std::size_t n);
    // out[i] += w[i] * a[i]
    void (*rmul_acc)(const double* w, const cplx* a, cplx* out, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(cplx alpha, const cplx* x, cplx* y, std::size_t n);
    // sum |a[i]|^2
    double (*norm2)(const cplx* a, std::size_t n);
    // sum w[i] |a[i]|^2
    double (*wnorm2)(const double* w, const cplx* a, std::size_t n);
    // Re sum conj(a[i]) b[i]
    double (*rdot)(const cplx* a, const cplx* b, std::size_t n);
    // sum a[i] b[i] (no conjugation)
    cplx (*cdot)(const cplx* a, const cplx* b, std::size_t n);
};

enum class Isa { scalar, avx2, neon };

const Kernels& scalar_kernels();
// Null when the variant was not compiled in.
const Kernels* avx2_kernels();
const Kernels* neon_kernels();

// Table chosen once at first use: best variant supported by the CPU, unless
// QLS_SIMD=scalar is set in the environment.
const Kernels& active();
Isa active_isa();
std::string isa_name(Isa isa);
bool cpu_supports(Isa isa);

}  // namespace qls::simd
