#include "contilora/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace contilora {

#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_kernels();
#endif
#if defined(__aarch64__)
const KernelTable& neon_kernels();
#endif

std::vector<const KernelTable*> available_kernels() {
    std::vector<const KernelTable*> out{&scalar_kernels()};
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        out.push_back(&avx2_kernels());
    }
#endif
#if defined(__aarch64__)
    out.push_back(&neon_kernels());
#endif
    return out;
}

namespace {

const KernelTable& resolve() {
    const auto tables = available_kernels();
    if (const char* forced = std::getenv("CONTILORA_KERNELS")) {
        for (const auto* t : tables) {
            if (std::strcmp(t->name, forced) == 0) return *t;
        }
        // Unknown or unavailable name: fall back to scalar rather than abort.
        return scalar_kernels();
    }
    return *tables.back();
}

}  // namespace

const KernelTable& kernels() {
    static const KernelTable& active = resolve();
    return active;
}

}  // namespace contilora
