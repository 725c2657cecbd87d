#include <cstdlib>
#include <string_view>

#include "gmfg/simd/kernels.hpp"

namespace gmfg::simd {

#ifdef GMFG_HAVE_AVX2
const KernelTable& avx2_table();  // kernels_avx2.cpp
#endif

const KernelTable* avx2_kernels() {
#ifdef GMFG_HAVE_AVX2
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") != 0;
  }();
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* env = std::getenv("GMFG_ISA");
    if (env != nullptr && std::string_view(env) == "scalar") return scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return *t;
    return scalar_kernels();
  }();
  return table;
}

}  // namespace gmfg::simd
