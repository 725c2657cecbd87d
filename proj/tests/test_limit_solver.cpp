#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "gmfg/errors.hpp"
#include "gmfg/limit_solver.hpp"
#include "gmfg/math.hpp"
#include "gmfg/noise.hpp"

using namespace gmfg;

namespace {

ModelParams network() {
  ModelParams p;
  p.A = p.D = p.eta = p.Sigma0 = 1.0;
  p.B = p.R = p.H = 2.0;
  p.Q = p.QT = 1.5;
  p.Sigma = 1.0;
  return p;
}

ModelParams generic() {
  ModelParams p;
  p.A = 0.3;
  p.B = 1.2;
  p.R = 0.7;
  p.D = 0.6;
  p.Q = 0.9;
  p.QT = 0.4;
  p.H = 0.5;
  p.eta = 0.8;
  p.Sigma = 0.5;
  p.Sigma0 = 0.7;
  p.T = 1.0;
  return p;
}

// y' = c2 y^2 + c1 y + c0 with y(T) = yT, for real distinct roots r1 != r2:
// u = (y - r1)/(y - r2) satisfies u' = c2 (r1 - r2) u.
double riccati_closed(double c2, double c1, double c0, double yT, double T, double t) {
  const double disc = std::sqrt(c1 * c1 - 4.0 * c2 * c0);
  const double r1 = (-c1 + disc) / (2.0 * c2), r2 = (-c1 - disc) / (2.0 * c2);
  const double u = (yT - r1) / (yT - r2) * std::exp(c2 * (r1 - r2) * (t - T));
  return (r1 - r2 * u) / (1.0 - u);
}

SpectralBasis sinusoid_basis(const MeanProfile& mu = MeanProfile::constant(1.0)) {
  return analytic_eigenpairs(parse_kernel_name("sinusoidal"), mu);
}

SpectralBasis rank_one_basis(double a = 0.8) {
  return analytic_eigenpairs(parse_kernel_name("rank_one{a=" + std::to_string(a) + "}"), MeanProfile::linear(0.5, 1.0));
}

}  // namespace

TEST_SUITE("limit_solver") {

TEST_CASE("model and grid validation") {
  ModelParams p;
  p.R = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = ModelParams{};
  p.Q = -1.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), ValidationError);
  CHECK_THROWS_AS(TimeGrid(-1.0, 10), ValidationError);
  const TimeGrid g(0.3, 7);
  CHECK(g.t(7) == 0.3);
  CHECK(g.nodes() == 8);
}

TEST_CASE("network example: f is constant 3 and g_ring has its closed form") {
  const TimeGrid grid(1.0, 200);
  const auto p = network();
  const auto f = solve_f(p, grid);
  for (double v : f) CHECK(std::fabs(v - 3.0) < 1e-12);
  const auto g = solve_g_ring(p, f, grid);
  for (std::size_t n = 0; n < grid.nodes(); ++n) {
    CHECK(std::fabs(g[n] + 3.0 * (std::exp(2.0 * (grid.t(n) - 1.0)) + 1.0)) < 1e-9);
  }
}

TEST_CASE("f matches the closed-form scalar Riccati solution") {
  const auto p = generic();
  const TimeGrid grid(p.T, 200);
  const auto f = solve_f(p, grid);
  for (std::size_t n = 0; n < grid.nodes(); n += 10) {
    const double want = riccati_closed(p.b(), -2.0 * p.A, -2.0 * p.Q, 2.0 * p.QT, p.T, grid.t(n));
    CHECK(std::fabs(f[n] - want) < 1e-9);
  }
}

TEST_CASE("network example modes: K matches the coupled pair closed form, z vanishes, q1 vanishes") {
  const auto p = network();
  const TimeGrid grid(1.0, 200);
  const auto sol = solve_limit(p, grid, sinusoid_basis());
  REQUIRE(sol.d() == 2);
  // g = K z with z' = -5/2 z + g/2 and g' = 2 g + 3 z gives K' = -K^2/2 + 9K/2 + 3, K_T = -6
  for (std::size_t n = 0; n < grid.nodes(); n += 20) {
    const double want = riccati_closed(-0.5, 4.5, 3.0, -6.0, 1.0, grid.t(n));
    CHECK(std::fabs(sol.modes[0].K[n] - want) < 1e-7);
    CHECK(sol.modes[0].K[n] == sol.modes[1].K[n]);
    CHECK(sol.modes[0].Phi[n] == 0.0);
    CHECK(sol.modes[0].q1[n] == 0.0);
  }
  CHECK(sol.sde[0].z0 == 0.0);
  CHECK(sol.sde[0].diffusion == 0.0);
  CHECK(sol.sde[0].slope[0] == doctest::Approx(-2.5 + 0.5 * sol.modes[0].K[0]));
  const auto mps = simulate_modes(sol, 3, 1);
  for (double z : mps.z) CHECK(z == 0.0);
  for (std::size_t i = 0; i < mps.g.size(); i += 2) CHECK(mps.g[i] == mps.g[i + 1]);
}

TEST_CASE("RK4 converges at fourth order") {
  const auto p = generic();
  const auto basis = rank_one_basis();
  const TimeGrid fine(p.T, 2560);
  const auto ref = solve_limit(p, fine, basis);
  const auto err = [&](int steps) {
    const auto s = solve_limit(p, TimeGrid(p.T, steps), basis);
    const std::size_t stride = 2560 / static_cast<std::size_t>(steps);
    double e = 0.0;
    for (std::size_t n = 0; n < s.grid.nodes(); ++n) {
      e = std::max(e, std::fabs(s.f[n] - ref.f[n * stride]));
      e = std::max(e, std::fabs(s.modes[0].K[n] - ref.modes[0].K[n * stride]));
      e = std::max(e, std::fabs(s.modes[0].Phi[n] - ref.modes[0].Phi[n * stride]));
      e = std::max(e, std::fabs(s.g_ring[n] - ref.g_ring[n * stride]));
    }
    return e;
  };
  const double ratio = err(20) / err(40);
  CHECK(ratio >= 8.0);
  CHECK(ratio <= 32.0);
}

TEST_CASE("degenerate costs give an all-zero solution") {
  auto p = generic();
  p.Q = p.QT = 0.0;
  const auto sol = solve_limit(p, TimeGrid(p.T, 50), rank_one_basis());
  for (double v : sol.f) CHECK(v == 0.0);
  for (double v : sol.g_ring) CHECK(v == 0.0);
  for (double v : sol.modes[0].K) CHECK(v == 0.0);
  for (double v : sol.modes[0].Phi) CHECK(v == 0.0);
}

TEST_CASE("monotonicity: network example takes the positive branch") {
  const auto p = network();
  const std::vector<double> f(11, 3.0);
  const auto r = check_monotonicity(p, -0.5, f);
  CHECK(r.branch == MonotonicityReport::Branch::Positive);
  CHECK(r.beta == doctest::Approx(2.875));
  CHECK(r.terminal_margin == doctest::Approx(3.0));
}

TEST_CASE("monotonicity: negative branch margin agrees with a brute-force sweep") {
  ModelParams p;
  p.A = 0.2;
  p.B = 1.0;
  p.R = 1.0;
  p.Q = 1.0;
  p.QT = 1.0;
  p.H = -1.0;
  p.D = 0.5;
  const TimeGrid grid(1.0, 20);
  const auto f = solve_f(p, grid);
  for (double lambda : {0.3, 0.0}) {
    const auto r = check_monotonicity(p, lambda, f);
    REQUIRE(r.branch == MonotonicityReport::Branch::Negative);
    // sup over y of (2QH - D f) + D lambda y - b lambda y^2 at x = 1, maximized over t
    double worst = -1e300;
    for (double ft : f) {
      double best_y = -1e300;
      for (int k = -200000; k <= 200000; ++k) {
        const double y = k * 1e-4;
        best_y = std::max(best_y, (2.0 * p.Q * p.H - p.D * ft) + p.D * lambda * y - p.b() * lambda * y * y);
      }
      worst = std::max(worst, best_y);
    }
    CHECK(r.beta == doctest::Approx(-worst).epsilon(1e-6));
  }
  // lambda < 0 makes the y^2 coefficient positive: no negative branch, and Q_T H < 0 rules out the other
  CHECK_FALSE(check_monotonicity(p, -0.3, f).feasible());
  ModelParams q = p;
  q.H = 0.0;
  CHECK_FALSE(check_monotonicity(q, 0.3, f).feasible());
}

TEST_CASE("Riccati blow-up is reported with the mode and time") {
  ModelParams p;
  p.A = 0.0;
  p.B = std::sqrt(2.0);
  p.R = 1.0;
  p.QT = 1.0;
  p.H = -10.0;
  p.eta = 1.0;
  const TimeGrid grid(1.0, 200);
  try {
    (void)solve_limit(p, grid, sinusoid_basis());
    FAIL("expected AssumptionViolated");
  } catch (const AssumptionViolated& e) {
    CHECK(e.mode() == 1);
    CHECK(e.time() > 0.0);
    CHECK(e.time() < 1.0);
    CHECK(std::string(e.what()).find("mode 1") != std::string::npos);
  }
}

TEST_CASE("exponential mode scheme is exact for constant coefficients, Euler is first order") {
  ModelParams p;
  p.A = -0.4;
  p.D = 0.9;
  p.B = 1.0;
  const auto basis = rank_one_basis(0.7);
  const double a = p.A + p.D * basis.pairs[0].lambda;
  const double z0 = basis.pairs[0].lambda * basis.pairs[0].inner_mu;
  const auto err = [&](int steps, SdeScheme s) {
    const auto sol = solve_limit(p, TimeGrid(1.0, steps), basis);
    const auto mps = simulate_modes(sol, 1, 0, s);
    double e = 0.0;
    for (std::size_t n = 0; n < mps.nodes; ++n) {
      e = std::max(e, std::fabs(mps.z_at(0, n, 0) - z0 * std::exp(a * sol.grid.t(n))));
    }
    return e;
  };
  CHECK(err(50, SdeScheme::Exponential) < 1e-13);
  const double e1 = err(50, SdeScheme::Euler), e2 = err(100, SdeScheme::Euler);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("mode paths use the population common-noise stream") {
  const auto p = generic();
  const auto sol = solve_limit(p, TimeGrid(p.T, 40), rank_one_basis());
  const auto mps = simulate_modes(sol, 3, 99);
  std::vector<double> dw(40);
  common_increments(99, 2, sol.grid.dt(), dw);
  for (std::size_t n = 0; n < 40; ++n) CHECK(mps.increments(2)[n] == dw[n]);
  const auto again = simulate_modes(sol, 3, 99);
  CHECK(again.z == mps.z);
  CHECK(again.g == mps.g);
}

TEST_CASE("cluster weights of the sinusoidal basis") {
  const auto basis = sinusoid_basis();
  for (int n : {4, 16, 7}) {
    const auto cw = cluster_weights(basis, n);
    for (int q = 1; q <= n; ++q) {
      const std::size_t c = static_cast<std::size_t>(q - 1);
      const double want = 2.0 * n / kPi * std::sin(kPi / n) * std::sin(kPi * ((2.0 * q - 1.0) / n + 0.25));
      CHECK(cw.weight(0, c) + cw.weight(1, c) == doctest::Approx(want).epsilon(1e-12));
      CHECK(cw.offset[c] == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("backward defect is small for the deterministic case") {
  auto p = generic();
  p.Sigma0 = 0.0;
  const auto sol = solve_limit(p, TimeGrid(p.T, 400), rank_one_basis());
  const auto mps = simulate_modes(sol, 2, 3, SdeScheme::Exponential);
  for (const auto& r : fbsde_residual(sol, mps)) CHECK(r.max_mean_defect < 1e-5);
}

TEST_CASE("limit solution JSON and mode-path CSV") {
  const auto sol = solve_limit(network(), TimeGrid(1.0, 10), sinusoid_basis());
  const auto j = limit_to_json(sol);
  CHECK(j["schema_version"] == 1);
  const auto dir = std::filesystem::temp_directory_path() / "gmfg_limit_test";
  std::filesystem::create_directories(dir);
  const auto mps = simulate_modes(sol, 3, 5);
  write_mode_paths_csv(dir / "m.csv", sol, mps, 2);
  std::ifstream in(dir / "m.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "# schema_version=1");
  std::getline(in, line);
  CHECK(line == "path,t,l,z_l,g_l");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * 11 * 2);
}

}
