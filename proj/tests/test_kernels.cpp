#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "doctest.h"
#include "gmfg/simd/kernels.hpp"

using namespace gmfg::simd;

namespace {

std::vector<double> randoms(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 100, 1001};

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar reductions match long double sums") {
  const auto& s = scalar_kernels();
  for (std::size_t n : kSizes) {
    const auto a = randoms(n, n + 1), b = randoms(n, n + 7);
    long double rs = 0, rd = 0, mag = 0;
    for (std::size_t i = 0; i < n; ++i) {
      rs += a[i];
      rd += static_cast<long double>(a[i]) * b[i];
      mag += std::fabs(a[i] * b[i]) + std::fabs(a[i]);
    }
    CHECK(std::fabs(s.sum(a.data(), n) - static_cast<double>(rs)) <= 1e-14 * static_cast<double>(mag) + 1e-300);
    CHECK(std::fabs(s.dot(a.data(), b.data(), n) - static_cast<double>(rd)) <= 1e-14 * static_cast<double>(mag) + 1e-300);
  }
}

TEST_CASE("scalar elementwise kernels follow their formulas") {
  const auto& s = scalar_kernels();
  auto x = randoms(9, 3);
  const auto noise = randoms(9, 4);
  auto expect = x;
  for (std::size_t i = 0; i < x.size(); ++i) expect[i] = (0.9 * expect[i] + 0.1) + 0.3 * noise[i];
  s.affine_update(x.data(), x.size(), 0.9, 0.1, 0.3, noise.data());
  CHECK(same_bits(x, expect));

  std::vector<double> cost(9, 1.0), want(9, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = -1.5 * x[i] + 0.25;
    want[i] += 0.5 * (x[i] - 2.0) * (x[i] - 2.0) + 0.75 * u * u;
  }
  s.quadratic_cost(cost.data(), x.data(), x.size(), 2.0, -1.5, 0.25, 0.5, 0.75);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(cost[i] == doctest::Approx(want[i]).epsilon(1e-15));
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const KernelTable* v = avx2_kernels();
  if (v == nullptr) {
    MESSAGE("AVX2 variant unavailable on this host; equivalence not exercised");
    return;
  }
  const auto& s = scalar_kernels();
  CHECK(v->isa == Isa::Avx2);
  for (std::size_t n : kSizes) {
    const auto a = randoms(n, 11 * n + 1), b = randoms(n, 13 * n + 2), noise = randoms(n, 17 * n + 3);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::fabs(a[i]) + std::fabs(a[i] * b[i]);
    CHECK(std::fabs(v->sum(a.data(), n) - s.sum(a.data(), n)) <= 4e-16 * mag + 1e-300);
    CHECK(std::fabs(v->dot(a.data(), b.data(), n) - s.dot(a.data(), b.data(), n)) <= 4e-16 * mag + 1e-300);

    auto xs = a, xv = a;
    s.affine_update(xs.data(), n, 0.97, -0.02, 0.4, noise.data());
    v->affine_update(xv.data(), n, 0.97, -0.02, 0.4, noise.data());
    CHECK(same_bits(xs, xv));

    std::vector<double> cs(b), cv(b);
    s.quadratic_cost(cs.data(), a.data(), n, 0.3, -1.2, 0.7, 0.01, 0.02);
    v->quadratic_cost(cv.data(), a.data(), n, 0.3, -1.2, 0.7, 0.01, 0.02);
    CHECK(same_bits(cs, cv));
  }
}

TEST_CASE("active table is one of the two variants") {
  const auto& k = active_kernels();
  CHECK((k.isa == Isa::Scalar || k.isa == Isa::Avx2));
  CHECK(std::string(k.name).size() > 0);
}

}
