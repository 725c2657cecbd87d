#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gmfg/errors.hpp"
#include "gmfg/math.hpp"
#include "gmfg/spectral.hpp"

using namespace gmfg;

TEST_SUITE("spectral") {

TEST_CASE("sinusoidal closed form") {
  const auto b = analytic_eigenpairs(parse_kernel_name("sinusoidal"), MeanProfile::constant(1.0));
  REQUIRE(b.size() == 2);
  for (const auto& p : b.pairs) {
    CHECK(p.lambda == -0.5);
    CHECK(std::fabs(p.inner_one) < 1e-15);
    CHECK(std::fabs(p.inner_mu) < 1e-15);
  }
  CHECK(orthonormality_residual(b).cwiseAbs().maxCoeff() < 1e-10);
  for (double r : eigen_equation_residual(Graphon::sinusoidal(), b, 64)) CHECK(r < 1e-6);
  const auto bound = eigenfunction_bound_check(b);
  CHECK(bound.bound == doctest::Approx(2.0));
  CHECK(bound.sup_abs[0] == doctest::Approx(std::sqrt(2.0)));
  CHECK(bound.ok);
  // mu = 1 + cos(2 pi a): <mu, sqrt2 cos> = 1/sqrt2
  const auto c = analytic_eigenpairs(parse_kernel_name("sinusoidal"), MeanProfile::cosine(1.0, 1.0));
  CHECK(c.pairs[0].inner_mu == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  CHECK(std::fabs(c.pairs[1].inner_mu) < 1e-9);
}

TEST_CASE("sampled sinusoid has the limit eigenvalues") {
  for (int n : {8, 32}) {
    const auto b = numeric_eigenpairs(step_from_matrix(sample_from_graphon(Graphon::sinusoidal(), n)), 2,
                                      MeanProfile::constant(1.0));
    for (const auto& p : b.pairs) CHECK(std::fabs(p.lambda + 0.5) < 0.05);
    CHECK(orthonormality_residual(b).cwiseAbs().maxCoeff() < 1e-10);
  }
  // rank 2, asking for 3 modes is an error
  CHECK_THROWS_AS(numeric_eigenpairs(step_from_matrix(sample_from_graphon(Graphon::sinusoidal(), 8)), 3,
                                     MeanProfile::constant(1.0)),
                  ValidationError);
}

TEST_CASE("numeric eigenpairs follow ordering and sign rules") {
  Eigen::MatrixXd m(3, 3);
  m << 1.0, 0.2, -0.3, 0.2, -0.8, 0.1, -0.3, 0.1, 0.5;
  const auto b = numeric_eigenpairs(step_from_matrix(m), 3, MeanProfile::constant(1.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m / 3.0);
  std::vector<double> mags;
  for (int i = 0; i < 3; ++i) mags.push_back(std::fabs(es.eigenvalues()(i)));
  std::sort(mags.rbegin(), mags.rend());
  for (int i = 0; i < 3; ++i) {
    CHECK(std::fabs(b.pairs[static_cast<std::size_t>(i)].lambda) == doctest::Approx(mags[static_cast<std::size_t>(i)]));
    const auto cells = b.pairs[static_cast<std::size_t>(i)].f.cell_values();
    double first = 0.0;
    for (double v : cells)
      if (std::fabs(v) > 1e-12) {
        first = v;
        break;
      }
    CHECK(first > 0.0);
  }
  // M f = lambda f on the step partition
  for (const auto& p : b.pairs) {
    const auto c = p.f.cell_values();
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int j = 0; j < 3; ++j) s += m(i, j) * c[static_cast<std::size_t>(j)] / 3.0;
      CHECK(s == doctest::Approx(p.lambda * c[static_cast<std::size_t>(i)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("uniform attachment eigenvalues") {
  const auto b = uniform_attachment_truncation(4, MeanProfile::constant(1.0));
  for (std::size_t i = 0; i < 4; ++i) {
    const double k = 2.0 * static_cast<double>(i) + 1.0;
    CHECK(b.pairs[i].lambda == doctest::Approx(4.0 / (k * k * kPi * kPi)).epsilon(1e-14));
    // <1, sqrt2 cos(k pi a / 2)> = 2 sqrt2 sin(k pi / 2) / (k pi)
    CHECK(b.pairs[i].inner_one == doctest::Approx(2.0 * std::sqrt(2.0) * std::sin(k * kPi / 2.0) / (k * kPi)).epsilon(1e-12));
  }
  for (double r : eigen_equation_residual(Graphon::uniform_attachment(), b, 256)) CHECK(r < 1e-4);
  CHECK(orthonormality_residual(b).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("sampled uniform attachment eigenvalue improves monotonically with N") {
  const double limit = 4.0 / (kPi * kPi);
  double prev = 1e9;
  for (int n : {4, 8, 16, 32, 64}) {
    const auto b = numeric_eigenpairs(step_from_matrix(sample_from_graphon(Graphon::uniform_attachment(), n)), 1,
                                      MeanProfile::constant(1.0));
    const double err = std::fabs(b.pairs[0].lambda - limit);
    CHECK(err < prev);
    prev = err;
  }
  CHECK(prev < 0.02);
}

TEST_CASE("rank-one kernel") {
  const auto b = analytic_eigenpairs(parse_kernel_name("rank_one{a=0.6}"), MeanProfile::constant(1.0));
  REQUIRE(b.size() == 1);
  const double norm = std::sqrt(1.5) - std::sqrt(0.5);
  CHECK(b.pairs[0].lambda == doctest::Approx(0.6 * norm).epsilon(1e-14));
  for (double r : eigen_equation_residual(Graphon::rank_one(0.6), b, 128)) CHECK(r < 1e-4);
  CHECK(orthonormality_residual(b).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(analytic_eigenpairs(parse_kernel_name("rank_one{a=0}"), MeanProfile::constant(1.0)), ValidationError);
  const auto n = numeric_eigenpairs(step_from_matrix(sample_from_graphon(Graphon::rank_one(0.6), 256)), 1,
                                    MeanProfile::constant(1.0));
  CHECK(n.pairs[0].lambda == doctest::Approx(0.6 * norm).epsilon(1e-2));
}

TEST_CASE("truncation error against the tail bound") {
  for (int modes : {1, 3, 5}) {
    const double tail = truncation_tail_bound(modes);
    for (int n : {4, 10}) CHECK(truncation_sectional_error(n, modes, 16) <= tail + 1e-12);
  }
  CHECK(truncation_tail_bound(5) == doctest::Approx(16.0 / (kPi * kPi * kPi) *
                                                     (kPi * kPi / 8.0 - 1.0 - 1.0 / 9 - 1.0 / 25 - 1.0 / 49 - 1.0 / 81))
                                         .epsilon(1e-14));
  CHECK(truncation_tail_bound(5) <= 0.0258);
}

TEST_CASE("finite-rank graphon reconstructs the kernel") {
  const auto b = analytic_eigenpairs(parse_kernel_name("sinusoidal"), MeanProfile::constant(1.0));
  const Graphon g = b.graphon();
  for (double a : {0.1, 0.45, 0.8})
    for (double c : {0.0, 0.3, 0.95}) {
      CHECK(g(a, c) == doctest::Approx(-std::cos(2.0 * kPi * (a - c))).epsilon(1e-12));
      CHECK(g(a, c) == g(c, a));
    }
}

TEST_CASE("basis JSON round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "gmfg_spectral_test";
  std::filesystem::create_directories(dir);
  SpectralBasis b = uniform_attachment_truncation(3, MeanProfile::linear(0.5, 1.0));
  const auto step = numeric_eigenpairs(step_from_matrix(sample_from_graphon(Graphon::rank_one(0.5), 5)), 1,
                                       MeanProfile::constant(1.0));
  b.pairs.push_back(step.pairs[0]);
  save_basis(dir / "b.json", b);
  const auto back = load_basis(dir / "b.json");
  REQUIRE(back.size() == b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    CHECK(back.pairs[i].lambda == b.pairs[i].lambda);
    CHECK(back.pairs[i].inner_mu == b.pairs[i].inner_mu);
    CHECK(back.pairs[i].f(0.37) == b.pairs[i].f(0.37));
  }
  auto doc = basis_to_json(b);
  doc["schema_version"] = 9;
  CHECK_THROWS_AS(basis_from_json(doc), ValidationError);
}

}
