#include "qls/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace qls::simd {

#ifndef QLS_BUILD_AVX2
const Kernels* avx2_kernels() { return nullptr; }
#endif
#ifndef QLS_BUILD_NEON
const Kernels* neon_kernels() { return nullptr; }
#endif

bool cpu_supports(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(__x86_64__) && defined(QLS_BUILD_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(QLS_BUILD_NEON)
            return true;
#else
            return false;
#endif
    }
    return false;
}

namespace {

struct Selection {
    const Kernels* table;
    Isa isa;
};

Selection select() {
    const char* env = std::getenv("QLS_SIMD");
    const bool force_scalar = env != nullptr && std::strcmp(env, "scalar") == 0;
    if (!force_scalar) {
        if (cpu_supports(Isa::avx2) && avx2_kernels() != nullptr) return {avx2_kernels(), Isa::avx2};
        if (cpu_supports(Isa::neon) && neon_kernels() != nullptr) return {neon_kernels(), Isa::neon};
    }
    return {&scalar_kernels(), Isa::scalar};
}

const Selection& selection() {
    static const Selection s = select();
    return s;
}

}  // namespace

const Kernels& active() { return *selection().table; }
Isa active_isa() { return selection().isa; }

std::string isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

}  // namespace qls::simd
