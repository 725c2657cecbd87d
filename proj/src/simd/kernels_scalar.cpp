#include "gmfg/simd/kernels.hpp"

namespace gmfg::simd {
namespace {

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void affine_update_scalar(double* x, std::size_t n, double mult, double add, double sigma,
                          const double* noise) {
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (mult * x[i] + add) + sigma * noise[i];
  }
}

void quadratic_cost_scalar(double* cost, const double* x, std::size_t n, double target,
                           double gain, double offset, double wq, double wr) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - target;
    const double u = gain * x[i] + offset;
    cost[i] = cost[i] + (wq * (d * d) + wr * (u * u));
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar,          "scalar",
                                 &sum_scalar,          &dot_scalar,
                                 &affine_update_scalar, &quadratic_cost_scalar};
  return table;
}

}  // namespace gmfg::simd
