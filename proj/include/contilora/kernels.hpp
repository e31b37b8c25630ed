#pragma once

#include <cstddef>
#include <vector>

namespace contilora {

// Vector primitives behind the dense-matrix layer. A scalar reference
// implementation always exists; wider variants (AVX2+FMA on x86-64, NEON on
// aarch64) are selected once at startup from CPU capabilities. The environment
// variable CONTILORA_KERNELS=scalar|avx2|neon forces a specific table.
struct KernelTable {
    const char* name;
    double (*dot)(const double* x, const double* y, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
    void (*scale)(double a, double* x, std::size_t n);                  // x *= a
    void (*add)(const double* x, double* y, std::size_t n);             // y += x
};

const KernelTable& scalar_kernels();

// Active table for this process; resolved on first call and stable thereafter.
const KernelTable& kernels();

// Every table usable on this machine (scalar first). For equivalence tests.
std::vector<const KernelTable*> available_kernels();

}  // namespace contilora
