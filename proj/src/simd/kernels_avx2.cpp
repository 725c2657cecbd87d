// Compiled with -mavx2 only; never called unless the CPU reports AVX2.
#include <immintrin.h>

#include "gmfg/simd/kernels.hpp"

namespace gmfg::simd {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    acc1 = _mm256_add_pd(acc1,
                         _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void affine_update_avx2(double* x, std::size_t n, double mult, double add, double sigma,
                        const double* noise) {
  const __m256d vm = _mm256_set1_pd(mult);
  const __m256d va = _mm256_set1_pd(add);
  const __m256d vs = _mm256_set1_pd(sigma);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_add_pd(_mm256_mul_pd(vm, _mm256_loadu_pd(x + i)), va);
    v = _mm256_add_pd(v, _mm256_mul_pd(vs, _mm256_loadu_pd(noise + i)));
    _mm256_storeu_pd(x + i, v);
  }
  for (; i < n; ++i) x[i] = (mult * x[i] + add) + sigma * noise[i];
}

void quadratic_cost_avx2(double* cost, const double* x, std::size_t n, double target,
                         double gain, double offset, double wq, double wr) {
  const __m256d vt = _mm256_set1_pd(target);
  const __m256d vg = _mm256_set1_pd(gain);
  const __m256d vo = _mm256_set1_pd(offset);
  const __m256d vq = _mm256_set1_pd(wq);
  const __m256d vr = _mm256_set1_pd(wr);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d d = _mm256_sub_pd(xv, vt);
    const __m256d u = _mm256_add_pd(_mm256_mul_pd(vg, xv), vo);
    const __m256d term = _mm256_add_pd(_mm256_mul_pd(vq, _mm256_mul_pd(d, d)),
                                       _mm256_mul_pd(vr, _mm256_mul_pd(u, u)));
    _mm256_storeu_pd(cost + i, _mm256_add_pd(_mm256_loadu_pd(cost + i), term));
  }
  for (; i < n; ++i) {
    const double d = x[i] - target;
    const double u = gain * x[i] + offset;
    cost[i] = cost[i] + (wq * (d * d) + wr * (u * u));
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::Avx2,          "avx2",
                                 &sum_avx2,          &dot_avx2,
                                 &affine_update_avx2, &quadratic_cost_avx2};
  return table;
}

}  // namespace gmfg::simd
