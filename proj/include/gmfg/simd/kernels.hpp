#pragma once

// Data-parallel inner loops of the quadrature and population code. Each
// kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant; the active table is chosen once at runtime from CPUID and the
// GMFG_ISA environment variable ("scalar" or "avx2").
//
// Elementwise kernels perform the same operations in the same order in every
// variant and are bit-identical. Reductions use a different association in the
// vector variant and agree with the reference to rounding.

#include <cstddef>
#include <span>

namespace gmfg::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);

  // x[i] = (mult * x[i] + add) + sigma * noise[i]
  void (*affine_update)(double* x, std::size_t n, double mult, double add, double sigma,
                        const double* noise);

  // u = gain * x[i] + offset
  // cost[i] += wq * (x[i] - target)^2 + wr * u^2
  void (*quadratic_cost)(double* cost, const double* x, std::size_t n, double target,
                         double gain, double offset, double wq, double wr);
};

const KernelTable& scalar_kernels();

/// AVX2 table, or nullptr when it was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

/// Table used by the library. Resolved once; honours GMFG_ISA.
const KernelTable& active_kernels();

inline double sum(std::span<const double> x) { return active_kernels().sum(x.data(), x.size()); }

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active_kernels().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

}  // namespace gmfg::simd
