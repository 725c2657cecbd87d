#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "gmfg/eigenfunction.hpp"
#include "gmfg/graphon.hpp"

namespace gmfg {

struct EigenPair {
  double lambda = 0.0;
  Eigenfunction f = Eigenfunction::constant();
  double inner_one = 0.0;  // <1, f>
  double inner_mu = 0.0;   // <mu, f>
};

struct SpectralBasis {
  std::vector<EigenPair> pairs;
  std::string source;

  std::size_t size() const { return pairs.size(); }
  /// The finite-rank graphon sum_l lambda_l f_l(a) f_l(b).
  Graphon graphon() const;
};

/// Recomputes inner_one and inner_mu for every pair.
void attach_mean(SpectralBasis& basis, const MeanProfile& mu);

/// Closed-form eigenpairs. `modes` is the number of odd-k terms kept for the
/// infinite-rank uniform-attachment kernel and is ignored otherwise.
SpectralBasis analytic_eigenpairs(const AnalyticKernel& kernel, const MeanProfile& mu, int modes = 0);

/// Eigenpairs of a step graphon: eigenvalues of M_N / N, eigenfunctions
/// sqrt(N) v held constant on cells. Ordered by |lambda| descending, ties by
/// signed value descending; each eigenvector's first nonzero entry is positive.
SpectralBasis numeric_eigenpairs(const Graphon& step, int d, const MeanProfile& mu);

/// Eigenvalues |lambda| at or below this are treated as zero.
inline constexpr double kRankCutoff = 1e-10;

/// Gram matrix minus identity. Step eigenfunctions are integrated exactly on
/// their own partition; closed forms use a midpoint grid of `cells` x m nodes.
Eigen::MatrixXd orthonormality_residual(const SpectralBasis& basis, int cells = 1024, int m = 8);

struct BoundReport {
  std::vector<double> sup_abs;  // per mode
  double bound = 0.0;           // 1 / min |lambda|
  std::vector<bool> violated;   // sup_abs > bound + 1e-6
  bool ok = true;
};

BoundReport eigenfunction_bound_check(const SpectralBasis& basis);

/// Leading `modes` odd terms of the uniform-attachment expansion, lambda = 4/(k pi)^2.
SpectralBasis uniform_attachment_truncation(int modes, const MeanProfile& mu);

/// Sectional L1 distance between the `modes`-term truncation and 1 - max(a, b)
/// on the uniform N-partition.
double truncation_sectional_error(int cells, int modes, int points_per_cell = 8);

/// N-free analytic upper bound 16/pi^3 (pi^2/8 - sum_{k odd, k <= 2 modes - 1} 1/k^2)
/// on the same quantity.
double truncation_tail_bound(int modes);

/// sup-norm of (M f_l - lambda_l f_l) over a midpoint grid, per mode.
std::vector<double> eigen_equation_residual(const Graphon& g, const SpectralBasis& basis, int cells,
                                            int m = 8);

nlohmann::json basis_to_json(const SpectralBasis& basis);
SpectralBasis basis_from_json(const nlohmann::json& doc);
void save_basis(const std::filesystem::path& path, const SpectralBasis& basis);
SpectralBasis load_basis(const std::filesystem::path& path);

}  // namespace gmfg
