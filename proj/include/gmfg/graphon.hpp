#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gmfg/eigenfunction.hpp"

namespace gmfg {

/// Uniform N-partition of [0,1] with a cell-aligned midpoint quadrature:
/// m nodes strictly inside each cell, all weights 1/(mN). Cells are 0-based
/// here; cell q is [q/N, (q+1)/N), the last one closed.
class AlphaGrid {
 public:
  explicit AlphaGrid(int cells, int points_per_cell = 8);

  int cells() const noexcept { return cells_; }
  int points_per_cell() const noexcept { return per_cell_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  double weight() const noexcept { return weight_; }
  std::span<const double> nodes() const noexcept { return nodes_; }
  double node(std::size_t k) const { return nodes_[k]; }
  int cell_of_node(std::size_t k) const { return static_cast<int>(k) / per_cell_; }

  double integrate(std::span<const double> values) const;
  double cell_integral(std::span<const double> values, int q) const;

  /// Samples f at every node.
  template <class F>
  std::vector<double> sample(F&& f) const {
    std::vector<double> out(nodes_.size());
    for (std::size_t k = 0; k < nodes_.size(); ++k) out[k] = f(nodes_[k]);
    return out;
  }

  /// 0-based index of the partition cell containing alpha in [0,1].
  static int cell_of(double alpha, int cells);

 private:
  int cells_;
  int per_cell_;
  double weight_;
  std::vector<double> nodes_;
};

/// Closed-form kernels addressable by name from a scenario file.
struct AnalyticKernel {
  enum class Kind { Sinusoidal, UniformAttachment, RankOne };
  Kind kind = Kind::Sinusoidal;
  double amplitude = 1.0;  // rank_one{a}

  double operator()(double a, double b) const;
  std::string name() const;
};

/// Parses "sinusoidal", "uniform_attachment", "rank_one{a=<real>}".
AnalyticKernel parse_kernel_name(const std::string& text);

struct FiniteRankTerm {
  double lambda;
  Eigenfunction f;
};

/// sum_l lambda_l f_l(a) f_l(b).
struct FiniteRankKernel {
  std::vector<FiniteRankTerm> terms;
  double operator()(double a, double b) const;
};

/// Cell-constant kernel of an N x N symmetric matrix with entries in [-1, 1].
struct StepKernel {
  Eigen::MatrixXd values;
  int size() const { return static_cast<int>(values.rows()); }
  double operator()(double a, double b) const;
};

class Graphon {
 public:
  enum class Kind { Analytic, FiniteRank, Step };

  static Graphon analytic(AnalyticKernel kernel);
  static Graphon sinusoidal();
  static Graphon uniform_attachment();
  static Graphon rank_one(double amplitude);
  static Graphon finite_rank(std::vector<FiniteRankTerm> terms);

  Kind kind() const noexcept;
  const AnalyticKernel* as_analytic() const { return std::get_if<AnalyticKernel>(&rep_); }
  const FiniteRankKernel* as_finite_rank() const { return std::get_if<FiniteRankKernel>(&rep_); }
  const StepKernel* as_step() const { return std::get_if<StepKernel>(&rep_); }

  /// M(a, b); throws DomainError outside [0,1]^2.
  double operator()(double a, double b) const;
  /// M(a, b) without range checks, for quadrature loops.
  double value(double a, double b) const;

  std::string describe() const;

 private:
  friend Graphon step_from_matrix(const Eigen::MatrixXd&);
  using Rep = std::variant<AnalyticKernel, FiniteRankKernel, StepKernel>;
  explicit Graphon(Rep rep) : rep_(std::move(rep)) {}
  Rep rep_;
};

inline double eval(const Graphon& g, double a, double b) { return g(a, b); }

/// Throws ValidationError unless m is square, symmetric and entries lie in [-1, 1].
void validate_adjacency(const Eigen::MatrixXd& m);

Graphon step_from_matrix(const Eigen::MatrixXd& m);

/// m_ij = M((i-1)/N, (j-1)/N) (left endpoints of the cells).
Eigen::MatrixXd sample_from_graphon(const Graphon& g, int nodes);

/// (M phi)(alpha_k) at every node of the grid.
std::vector<double> apply_operator(const Graphon& g, const AlphaGrid& grid,
                                   std::span<const double> phi);

/// max_q N * int_0^1 | int_{P_q} (a - b)(alpha, beta) dbeta | dalpha over the
/// uniform N-partition. The inner cell integral is taken before the absolute
/// value.
double sectional_l1_distance(const Graphon& a, const Graphon& b, int cells,
                             int points_per_cell = 8);

/// E_N: sectional_l1_distance against a step graphon's own partition.
double sectional_l1_error(const Graphon& limit, const Graphon& step, int points_per_cell = 8);

/// Initial-state mean profile mu(alpha) = E x_0^alpha.
class MeanProfile {
 public:
  enum class Kind { Constant, Linear, Cosine, NodeVector };
  enum class NodeRule { Sample, CellAverage };

  static MeanProfile constant(double c);
  static MeanProfile linear(double intercept, double slope);
  static MeanProfile cosine(double offset, double amplitude);
  static MeanProfile node_vector(std::vector<double> node_means);

  Kind kind() const noexcept { return kind_; }
  double operator()(double alpha) const;
  double sup_abs() const;
  double cell_average(int q, int cells) const;

  /// Per-node means mu_q for an N-node graph. A NodeVector profile requires
  /// matching N and returns its values.
  std::vector<double> node_means(int cells, NodeRule rule) const;

  /// <mu, f>; exact for constant profiles, otherwise midpoint quadrature.
  double inner(const Eigenfunction& f, int resolution = 8192) const;

  std::string describe() const;

  double p0() const { return p0_; }
  double p1() const { return p1_; }
  std::span<const double> values() const { return values_; }

 private:
  Kind kind_ = Kind::Constant;
  double p0_ = 0.0;
  double p1_ = 0.0;
  std::vector<double> values_;
};

/// E_N' = int_0^1 |mu^[N] - mu| with mu^[N] the step function of node_means.
double mean_l1_error(const MeanProfile& mu, std::span<const double> node_means,
                     int points_per_cell = 8);

struct CutNormEstimate {
  double value = 0.0;
  bool exhaustive = false;  // false: greedy sign-split heuristic
};

/// Lower bound on the cut norm: max over unions S, T of cells of a uniform
/// partition with `resolution` cells of |int_{S x T} M|. Exhaustive over S
/// (with the optimal T for each S) up to kCutNormExhaustiveCap cells, greedy
/// alternating refinement above it.
inline constexpr int kCutNormExhaustiveCap = 16;
CutNormEstimate cut_norm_lower_bound(const Graphon& g, int resolution, int points_per_cell = 8);

void save_adjacency_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_adjacency_csv(const std::filesystem::path& path);

}  // namespace gmfg
