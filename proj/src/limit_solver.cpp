#include "gmfg/limit_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gmfg/errors.hpp"
#include "gmfg/math.hpp"
#include "gmfg/noise.hpp"

namespace gmfg {

void ModelParams::validate() const {
  const auto finite = [](double v) { return std::isfinite(v); };
  for (double v : {A, B, D, Sigma, Sigma0, Q, QT, R, H, eta, T}) {
    if (!finite(v)) throw ValidationError("model parameters must be finite");
  }
  if (Q < 0.0) throw ValidationError("model: Q must be >= 0");
  if (QT < 0.0) throw ValidationError("model: Q_T must be >= 0");
  if (R <= 0.0) throw ValidationError("model: R must be > 0");
  if (T <= 0.0) throw ValidationError("model: T must be > 0");
  if (Sigma < 0.0) throw ValidationError("model: Sigma must be >= 0");
  if (Sigma0 < 0.0) throw ValidationError("model: Sigma0 must be >= 0");
}

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ValidationError("time grid: T must be > 0");
  if (steps < 1) throw ValidationError("time grid: steps must be >= 1");
  dt_ = horizon / steps;
}

double TimeGrid::t(std::size_t n) const {
  if (n >= nodes()) throw DomainError("time grid index out of range");
  return n == static_cast<std::size_t>(steps_) ? horizon_ : static_cast<double>(n) * dt_;
}

namespace {

// Riccati right-hand side: f' = b f^2 - 2A f - 2Q.
double f_rate(const ModelParams& p, double f) { return p.b() * f * f - 2.0 * p.A * f - 2.0 * p.Q; }

// Cubic Hermite value of f at the middle of [t_n, t_{n+1}].
double f_mid(const ModelParams& p, std::span<const double> f, std::size_t n, double h) {
  return 0.5 * (f[n] + f[n + 1]) + h / 8.0 * (f_rate(p, f[n]) - f_rate(p, f[n + 1]));
}

void require_grid(std::span<const double> f, const TimeGrid& grid) {
  if (f.size() != grid.nodes()) throw ValidationError("grid function does not match the time grid");
}

}  // namespace

GridFunction solve_f(const ModelParams& p, const TimeGrid& grid) {
  p.validate();
  const std::size_t M = static_cast<std::size_t>(grid.steps());
  const double h = grid.dt();
  GridFunction f(grid.nodes());
  f[M] = 2.0 * p.QT;
  for (std::size_t n = M; n-- > 0;) {
    const double y = f[n + 1];
    const double k1 = f_rate(p, y);
    const double k2 = f_rate(p, y - 0.5 * h * k1);
    const double k3 = f_rate(p, y - 0.5 * h * k2);
    const double k4 = f_rate(p, y - h * k3);
    f[n] = y - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(f[n])) {
      throw NumericalError("Riccati equation for f is not finite at t=" + std::to_string(grid.t(n)));
    }
  }
  return f;
}

MonotonicityReport check_monotonicity(const ModelParams& p, double lambda, std::span<const double> f) {
  MonotonicityReport r;
  if (f.empty()) throw ValidationError("check_monotonicity: empty f");
  // a_t x^2 + cross x y + c y^2
  const double cross = p.D * lambda;
  const double c = -p.b() * lambda;
  const double qth = p.QT * p.H;
  const auto a_at = [&](double ft) { return 2.0 * p.Q * p.H - p.D * ft; };

  if (c == 0.0 && cross != 0.0) {
    r.reason = "cross term D*lambda is nonzero while the y^2 coefficient vanishes";
    return r;
  }
  // Negative branch: [[a + beta, cross/2], [cross/2, c]] <= 0 for every t.
  if (c <= 0.0) {
    double worst = -INFINITY;
    for (double ft : f) worst = std::max(worst, c == 0.0 ? a_at(ft) : a_at(ft) - cross * cross / (4.0 * c));
    const double beta = -worst;
    if (beta > 0.0 && qth < 0.0) {
      r.branch = MonotonicityReport::Branch::Negative;
      r.beta = beta;
      r.terminal_margin = -qth;
      return r;
    }
    if (c < 0.0) {
      r.reason = beta > 0.0 ? "negative branch needs Q_T H < 0" : "quadratic form is not uniformly negative";
      return r;
    }
  }
  // Positive branch: [[a - beta, cross/2], [cross/2, c]] >= 0 for every t.
  double best = INFINITY;
  for (double ft : f) best = std::min(best, c == 0.0 ? a_at(ft) : a_at(ft) - cross * cross / (4.0 * c));
  if (best > 0.0 && qth > 0.0) {
    r.branch = MonotonicityReport::Branch::Positive;
    r.beta = best;
    r.terminal_margin = qth;
    return r;
  }
  r.reason = best > 0.0 ? "positive branch needs Q_T H > 0" : "quadratic form is definite in neither direction";
  return r;
}

ModeSolution solve_mode(const ModelParams& p, const EigenPair& pair, std::span<const double> f,
                        const TimeGrid& grid, int mode_index) {
  require_grid(f, grid);
  const std::size_t M = static_cast<std::size_t>(grid.steps());
  const double h = grid.dt();
  const double b = p.b();
  const double lam = pair.lambda;
  const double one = pair.inner_one;
  const double forcing = 2.0 * p.Q * p.H * p.eta * one;

  const auto k_rate = [&](double ft, double k) {
    return b * lam * k * k - (2.0 * p.A - 2.0 * b * ft + p.D * lam) * k - p.D * ft + 2.0 * p.Q * p.H;
  };
  const auto phi_rate = [&](double ft, double k, double phi) {
    return -(p.A - b * ft - b * lam * k) * phi + forcing;
  };

  ModeSolution s;
  s.K.assign(grid.nodes(), 0.0);
  s.Phi.assign(grid.nodes(), 0.0);
  s.K[M] = -2.0 * p.QT * p.H;
  s.Phi[M] = -2.0 * p.QT * p.H * p.eta * one;

  for (std::size_t n = M; n-- > 0;) {
    const double f1 = f[n + 1], fm = f_mid(p, f, n, h), f0 = f[n];
    const double k = s.K[n + 1], ph = s.Phi[n + 1];
    const double a1 = k_rate(f1, k), b1 = phi_rate(f1, k, ph);
    const double k2s = k - 0.5 * h * a1, p2s = ph - 0.5 * h * b1;
    const double a2 = k_rate(fm, k2s), b2 = phi_rate(fm, k2s, p2s);
    const double k3s = k - 0.5 * h * a2, p3s = ph - 0.5 * h * b2;
    const double a3 = k_rate(fm, k3s), b3 = phi_rate(fm, k3s, p3s);
    const double k4s = k - h * a3, p4s = ph - h * b3;
    const double a4 = k_rate(f0, k4s), b4 = phi_rate(f0, k4s, p4s);
    s.K[n] = k - h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    s.Phi[n] = ph - h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    if (!std::isfinite(s.K[n]) || std::fabs(s.K[n]) > kBlowUpThreshold) {
      std::ostringstream os;
      os << "Riccati equation for mode " << mode_index + 1 << " (lambda=" << lam << ") blows up near t="
         << grid.t(n) << "; the decoupled solution does not exist on this horizon";
      throw AssumptionViolated(os.str(), mode_index + 1, grid.t(n));
    }
    if (!std::isfinite(s.Phi[n])) throw NumericalError("mode offset is not finite");
  }

  const double scale = p.Sigma0 * lam * one;
  s.q1.resize(grid.nodes());
  for (std::size_t n = 0; n <= M; ++n) s.q1[n] = scale * s.K[n];
  return s;
}

GridFunction solve_g_ring(const ModelParams& p, std::span<const double> f, const TimeGrid& grid) {
  require_grid(f, grid);
  const std::size_t M = static_cast<std::size_t>(grid.steps());
  const double h = grid.dt();
  const double b = p.b();
  const double forcing = 2.0 * p.Q * p.H * p.eta;
  const auto rate = [&](double ft, double g) { return -(p.A - b * ft) * g + forcing; };

  GridFunction g(grid.nodes());
  g[M] = -2.0 * p.QT * p.H * p.eta;
  for (std::size_t n = M; n-- > 0;) {
    const double fm = f_mid(p, f, n, h);
    const double y = g[n + 1];
    const double k1 = rate(f[n + 1], y);
    const double k2 = rate(fm, y - 0.5 * h * k1);
    const double k3 = rate(fm, y - 0.5 * h * k2);
    const double k4 = rate(f[n], y - h * k3);
    g[n] = y - h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return g;
}

LimitSolution solve_limit(const ModelParams& p, const TimeGrid& grid, const SpectralBasis& basis) {
  p.validate();
  if (basis.pairs.empty()) throw ValidationError("spectral basis is empty");
  LimitSolution sol;
  sol.params = p;
  sol.grid = grid;
  sol.basis = basis;
  sol.f = solve_f(p, grid);
  sol.g_ring = solve_g_ring(p, sol.f, grid);

  const double b = p.b();
  for (std::size_t l = 0; l < basis.pairs.size(); ++l) {
    const auto& pair = basis.pairs[l];
    sol.monotonicity.push_back(check_monotonicity(p, pair.lambda, sol.f));
    try {
      sol.modes.push_back(solve_mode(p, pair, sol.f, grid, static_cast<int>(l)));
    } catch (const AssumptionViolated& e) {
      if (!sol.monotonicity.back().feasible()) throw;
      throw AssumptionViolated(std::string(e.what()) +
                                   "; the monotonicity condition holds, so a solution exists, but the "
                                   "decoupled computation is unavailable",
                               e.mode(), e.time());
    }
    const auto& m = sol.modes.back();
    ModeSde sde;
    sde.slope.resize(grid.nodes());
    sde.offset.resize(grid.nodes());
    for (std::size_t n = 0; n < grid.nodes(); ++n) {
      sde.slope[n] = p.A - b * sol.f[n] + p.D * pair.lambda - b * pair.lambda * m.K[n];
      sde.offset[n] = -b * pair.lambda * m.Phi[n];
    }
    sde.diffusion = p.Sigma0 * pair.lambda * pair.inner_one;
    sde.z0 = pair.lambda * pair.inner_mu;
    sol.sde.push_back(std::move(sde));
  }
  return sol;
}

nlohmann::json limit_to_json(const LimitSolution& sol) {
  const auto& p = sol.params;
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["params"] = {{"A", p.A},   {"B", p.B},   {"D", p.D}, {"Sigma", p.Sigma}, {"Sigma0", p.Sigma0},
                   {"Q", p.Q},   {"Q_T", p.QT}, {"R", p.R}, {"H", p.H},         {"eta", p.eta},
                   {"T", p.T}};
  doc["grid"] = {{"steps", sol.grid.steps()}, {"dt", sol.grid.dt()}};
  std::vector<double> t(sol.grid.nodes());
  for (std::size_t n = 0; n < t.size(); ++n) t[n] = sol.grid.t(n);
  doc["t"] = t;
  doc["f"] = sol.f;
  doc["g_ring"] = sol.g_ring;
  doc["basis"] = basis_to_json(sol.basis);
  auto& modes = doc["modes"] = nlohmann::json::array();
  for (std::size_t l = 0; l < sol.d(); ++l) {
    const auto& m = sol.modes[l];
    const auto& s = sol.sde[l];
    const auto& mono = sol.monotonicity[l];
    const char* branch = mono.branch == MonotonicityReport::Branch::Negative   ? "negative"
                         : mono.branch == MonotonicityReport::Branch::Positive ? "positive"
                                                                               : "infeasible";
    modes.push_back({{"l", l + 1},
                     {"lambda", sol.basis.pairs[l].lambda},
                     {"K", m.K},
                     {"Phi", m.Phi},
                     {"q1", m.q1},
                     {"drift_slope", s.slope},
                     {"drift_offset", s.offset},
                     {"diffusion", s.diffusion},
                     {"z0", s.z0},
                     {"monotonicity", {{"branch", branch}, {"beta", mono.beta},
                                       {"terminal_margin", mono.terminal_margin}, {"reason", mono.reason}}}});
  }
  return doc;
}

SdeScheme parse_scheme(const std::string& name) {
  if (name == "euler") return SdeScheme::Euler;
  if (name == "exponential") return SdeScheme::Exponential;
  throw ValidationError("unknown SDE scheme '" + name + "' (expected euler or exponential)");
}

const char* scheme_name(SdeScheme s) { return s == SdeScheme::Euler ? "euler" : "exponential"; }

void simulate_mode_path(const LimitSolution& sol, std::span<const double> dW0, SdeScheme scheme,
                        std::span<double> z, std::span<double> g) {
  const std::size_t d = sol.d();
  const std::size_t nodes = sol.grid.nodes();
  const double dt = sol.grid.dt();
  if (dW0.size() + 1 != nodes || z.size() != nodes * d || g.size() != nodes * d) {
    throw ValidationError("simulate_mode_path: buffer sizes do not match the grid");
  }
  for (std::size_t l = 0; l < d; ++l) {
    const auto& s = sol.sde[l];
    double x = s.z0;
    z[l] = x;
    for (std::size_t n = 0; n + 1 < nodes; ++n) {
      if (scheme == SdeScheme::Euler) {
        x = x + (s.slope[n] * x + s.offset[n]) * dt + s.diffusion * dW0[n];
      } else {
        const double a = 0.5 * (s.slope[n] + s.slope[n + 1]);
        const double off = 0.5 * (s.offset[n] + s.offset[n + 1]);
        x = std::exp(a * dt) * x + dt * expm1_over_x(a * dt) * off +
            s.diffusion * std::sqrt(expm1_over_x(2.0 * a * dt)) * dW0[n];
      }
      z[(n + 1) * d + l] = x;
    }
    const auto& m = sol.modes[l];
    for (std::size_t n = 0; n < nodes; ++n) g[n * d + l] = m.K[n] * z[n * d + l] + m.Phi[n];
  }
}

ModePathSet simulate_modes(const LimitSolution& sol, std::size_t paths, std::uint64_t seed, SdeScheme scheme) {
  ModePathSet s;
  s.paths = paths;
  s.nodes = sol.grid.nodes();
  s.d = sol.d();
  const std::size_t steps = s.nodes - 1;
  s.dW0.resize(paths * steps);
  s.z.resize(paths * s.nodes * s.d);
  s.g.resize(paths * s.nodes * s.d);
  const std::size_t stride = s.nodes * s.d;
  for (std::size_t p = 0; p < paths; ++p) {
    std::span<double> inc(s.dW0.data() + p * steps, steps);
    common_increments(seed, p, sol.grid.dt(), inc);
    simulate_mode_path(sol, inc, scheme, std::span<double>(s.z.data() + p * stride, stride),
                       std::span<double>(s.g.data() + p * stride, stride));
  }
  return s;
}

ClusterWeights cluster_weights(const SpectralBasis& basis, int cells) {
  if (cells < 1) throw ValidationError("cluster_weights: N must be positive");
  ClusterWeights cw;
  cw.cells = cells;
  const std::size_t N = static_cast<std::size_t>(cells);
  cw.w.resize(basis.pairs.size() * N);
  cw.offset.assign(N, 1.0);
  for (std::size_t l = 0; l < basis.pairs.size(); ++l) {
    const auto& pair = basis.pairs[l];
    for (std::size_t q = 0; q < N; ++q) {
      const double w = pair.f.cell_average(static_cast<int>(q), cells);
      cw.w[l * N + q] = w;
      cw.offset[q] -= pair.inner_one * w;
    }
  }
  return cw;
}

void strategy_fields(const LimitSolution& sol, const ClusterWeights& cw, std::span<const double> z,
                     std::span<const double> g, std::span<double> z_bar, std::span<double> g_bar) {
  const std::size_t d = sol.d();
  const std::size_t nodes = sol.grid.nodes();
  const std::size_t N = static_cast<std::size_t>(cw.cells);
  if (z.size() != nodes * d || g.size() != nodes * d || z_bar.size() != nodes * N || g_bar.size() != nodes * N) {
    throw ValidationError("strategy_fields: buffer sizes do not match the grid");
  }
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t q = 0; q < N; ++q) {
      double zs = 0.0, gs = 0.0;
      for (std::size_t l = 0; l < d; ++l) {
        const double w = cw.weight(l, q);
        zs += z[n * d + l] * w;
        gs += g[n * d + l] * w;
      }
      z_bar[n * N + q] = zs;
      g_bar[n * N + q] = gs + sol.g_ring[n] * cw.offset[q];
    }
  }
}

std::vector<ResidualStat> fbsde_residual(const LimitSolution& sol, const ModePathSet& mps) {
  const auto& p = sol.params;
  const std::size_t d = sol.d();
  const std::size_t nodes = sol.grid.nodes();
  if (mps.d != d || mps.nodes != nodes) throw ValidationError("fbsde_residual: path set does not match solution");
  const double dt = sol.grid.dt();
  const double b = p.b();
  std::vector<ResidualStat> out(d);
  std::vector<MomentAccumulator> acc(nodes);
  std::vector<double> defect(nodes);
  for (std::size_t l = 0; l < d; ++l) {
    std::fill(acc.begin(), acc.end(), MomentAccumulator{});
    const double one = sol.basis.pairs[l].inner_one;
    const auto& q1 = sol.modes[l].q1;
    for (std::size_t path = 0; path < mps.paths; ++path) {
      const auto dW = mps.increments(path);
      const auto bracket = [&](std::size_t n) {
        const double z = mps.z_at(path, n, l), g = mps.g_at(path, n, l);
        return (p.A - b * sol.f[n]) * g + (p.D * sol.f[n] - 2.0 * p.Q * p.H) * z - 2.0 * p.Q * p.H * p.eta * one;
      };
      const double terminal = -2.0 * p.QT * p.H * (mps.z_at(path, nodes - 1, l) + p.eta * one);
      double drift = 0.0, stoch = 0.0;
      double right = bracket(nodes - 1);
      defect[nodes - 1] = mps.g_at(path, nodes - 1, l) - terminal;
      for (std::size_t n = nodes - 1; n-- > 0;) {
        const double left = bracket(n);
        drift += 0.5 * (left + right) * dt;
        stoch += q1[n] * dW[n];
        right = left;
        defect[n] = mps.g_at(path, n, l) - (terminal + drift - stoch);
      }
      for (std::size_t n = 0; n < nodes; ++n) acc[n].add(std::fabs(defect[n]));
    }
    for (std::size_t n = 0; n < nodes; ++n) {
      const auto e = acc[n].estimate();
      if (n == 0 || e.mean > out[l].max_mean_defect) out[l] = {e.mean, e.std_error, n};
    }
  }
  return out;
}

void write_mode_paths_csv(const std::filesystem::path& path, const LimitSolution& sol, const ModePathSet& mps,
                          std::size_t max_paths) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "# schema_version=1\n";
  out << "path,t,l,z_l,g_l\n";
  char buf[160];
  const std::size_t count = std::min(max_paths, mps.paths);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t n = 0; n < mps.nodes; ++n) {
      for (std::size_t l = 0; l < mps.d; ++l) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,%.17g,%.17g\n", p, sol.grid.t(n), l + 1, mps.z_at(p, n, l),
                      mps.g_at(p, n, l));
        out << buf;
      }
    }
  }
}

}  // namespace gmfg
