#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "gmfg/spectral.hpp"

namespace gmfg {

struct ModelParams {
  double A = 0.0, B = 1.0, D = 0.0;
  double Sigma = 0.0, Sigma0 = 0.0;
  double Q = 0.0, QT = 0.0, R = 1.0;
  double H = 0.0, eta = 0.0;
  double T = 1.0;

  /// B^2 / (2R).
  double b() const { return B * B / (2.0 * R); }
  /// Throws ValidationError naming the first violated constraint.
  void validate() const;
};

class TimeGrid {
 public:
  TimeGrid(double horizon, int steps);

  int steps() const noexcept { return steps_; }
  std::size_t nodes() const noexcept { return static_cast<std::size_t>(steps_) + 1; }
  double horizon() const noexcept { return horizon_; }
  double dt() const noexcept { return dt_; }
  /// t_n = n T / M; the last node is exactly T.
  double t(std::size_t n) const;

 private:
  double horizon_;
  int steps_;
  double dt_;
};

using GridFunction = std::vector<double>;

/// f' - b f^2 + 2A f + 2Q = 0, f_T = 2 Q_T.
GridFunction solve_f(const ModelParams& p, const TimeGrid& grid);

struct MonotonicityReport {
  enum class Branch { Negative, Positive, Infeasible };
  Branch branch = Branch::Infeasible;
  double beta = 0.0;             // largest certified margin of the quadratic form
  double terminal_margin = 0.0;  // |Q_T H| when the terminal sign matches the branch
  std::string reason;

  bool feasible() const { return branch != Branch::Infeasible; }
};

/// Checks whether D l x y + (2QH - D f_t) x^2 - b l y^2 <= -beta x^2 with
/// Q_T H < 0 (negative branch) or >= beta x^2 with Q_T H > 0 (positive
/// branch) holds for some beta > 0 uniformly over the grid.
MonotonicityReport check_monotonicity(const ModelParams& p, double lambda, std::span<const double> f);

struct ModeSolution {
  GridFunction K, Phi, q1;
};

/// Riccati K and offset Phi for one eigenpair, backward RK4 on a shared
/// grid. Throws AssumptionViolated when |K| exceeds kBlowUpThreshold.
ModeSolution solve_mode(const ModelParams& p, const EigenPair& pair, std::span<const double> f,
                        const TimeGrid& grid, int mode_index = 0);

inline constexpr double kBlowUpThreshold = 1e6;

/// dg/dt = -(A - b f) g + 2QH eta, g_T = -2 Q_T H eta.
GridFunction solve_g_ring(const ModelParams& p, std::span<const double> f, const TimeGrid& grid);

/// dz = (slope_t z + offset_t) dt + diffusion dW0, z_0 = z0.
struct ModeSde {
  GridFunction slope, offset;
  double diffusion = 0.0;
  double z0 = 0.0;
};

struct LimitSolution {
  ModelParams params;
  TimeGrid grid{1.0, 1};
  SpectralBasis basis;
  GridFunction f, g_ring;
  std::vector<ModeSolution> modes;
  std::vector<ModeSde> sde;
  std::vector<MonotonicityReport> monotonicity;

  std::size_t d() const { return basis.pairs.size(); }
};

/// Full limit solve. A Riccati blow-up is rethrown with a note when the
/// monotonicity check nevertheless holds for that mode.
LimitSolution solve_limit(const ModelParams& p, const TimeGrid& grid, const SpectralBasis& basis);

nlohmann::json limit_to_json(const LimitSolution& sol);

enum class SdeScheme { Euler, Exponential };
SdeScheme parse_scheme(const std::string& name);
const char* scheme_name(SdeScheme s);

/// Mode states along one common-noise path. z and g are node-major with d
/// entries per node.
void simulate_mode_path(const LimitSolution& sol, std::span<const double> dW0, SdeScheme scheme,
                        std::span<double> z, std::span<double> g);

struct ModePathSet {
  std::size_t paths = 0, nodes = 0, d = 0;
  std::vector<double> dW0;  // paths x steps
  std::vector<double> z;    // paths x nodes x d
  std::vector<double> g;

  std::span<const double> increments(std::size_t path) const {
    return std::span<const double>(dW0).subspan(path * (nodes - 1), nodes - 1);
  }
  double z_at(std::size_t path, std::size_t n, std::size_t l) const { return z[(path * nodes + n) * d + l]; }
  double g_at(std::size_t path, std::size_t n, std::size_t l) const { return g[(path * nodes + n) * d + l]; }
};

/// Paths draw W0 from the same per-path stream as the population simulator,
/// so mode paths and population runs with equal seeds see the same W0.
ModePathSet simulate_modes(const LimitSolution& sol, std::size_t paths, std::uint64_t seed,
                           SdeScheme scheme = SdeScheme::Euler);

/// w(l, q) = N * integral of f_l over cell q, offset(q) = 1 - sum_l <1,f_l> w(l, q).
struct ClusterWeights {
  int cells = 0;
  std::vector<double> w;  // d x N, row-major by mode
  std::vector<double> offset;

  double weight(std::size_t l, std::size_t q) const { return w[l * static_cast<std::size_t>(cells) + q]; }
};

ClusterWeights cluster_weights(const SpectralBasis& basis, int cells);

/// z_bar and g_bar (node-major, N per node) for one path.
void strategy_fields(const LimitSolution& sol, const ClusterWeights& cw, std::span<const double> z,
                     std::span<const double> g, std::span<double> z_bar, std::span<double> g_bar);

struct ResidualStat {
  double max_mean_defect = 0.0;  // max over nodes of the path-mean |defect|
  double std_error = 0.0;        // at the maximizing node
  std::size_t node = 0;
};

/// Backward-equation defect of g = K z + Phi along simulated paths: g_t minus
/// its terminal value plus the trapezoid drift integral minus the left-point
/// stochastic integral over [t, T].
std::vector<ResidualStat> fbsde_residual(const LimitSolution& sol, const ModePathSet& mps);

/// CSV (path,t,l,z_l,g_l) for the first max_paths paths; l is 1-based.
void write_mode_paths_csv(const std::filesystem::path& path, const LimitSolution& sol, const ModePathSet& mps,
                          std::size_t max_paths);

}  // namespace gmfg
