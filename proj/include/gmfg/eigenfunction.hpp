#pragma once

#include <span>
#include <string>
#include <vector>

namespace gmfg {

/// A normalized function on [0,1] used as a graphon eigenfunction: either one
/// of a few closed forms or a piecewise-constant function on a uniform
/// partition. Every kind has an exact primitive, so cell averages and
/// inner products with 1 need no quadrature.
class Eigenfunction {
 public:
  enum class Kind {
    Constant,    // 1
    Cos2Pi,      // sqrt(2) cos(2 pi a)
    Sin2Pi,      // sqrt(2) sin(2 pi a)
    HalfCosine,  // sqrt(2) cos(k pi a / 2), k odd
    RankOne,     // v / ||v||,  v(a) = 1 / (sqrt(2) (a + 1/2)^(1/4))
    Step,        // value c_j on the j-th of n uniform cells
  };

  static Eigenfunction constant();
  static Eigenfunction cos2pi();
  static Eigenfunction sin2pi();
  static Eigenfunction half_cosine(int k);
  static Eigenfunction rank_one_profile();
  static Eigenfunction step(std::vector<double> cell_values);

  Kind kind() const noexcept { return kind_; }
  int order() const noexcept { return order_; }
  std::span<const double> cell_values() const noexcept { return cells_; }

  double operator()(double alpha) const;

  /// Integral over [0, alpha].
  double primitive(double alpha) const;
  double integral(double lo, double hi) const { return primitive(hi) - primitive(lo); }

  /// N * integral over the 0-based cell q of the uniform N-partition.
  double cell_average(int q, int cells) const;

  /// <1, f>.
  double mean() const { return primitive(1.0); }

  /// ess sup |f| (exact for every kind).
  double sup_abs() const;

  std::string label() const;

 private:
  Eigenfunction(Kind kind, int order) : kind_(kind), order_(order) {}

  Kind kind_;
  int order_ = 0;
  std::vector<double> cells_;
};

/// ||v||_2^2 for the rank-one profile v(a) = 1 / (sqrt(2) (a + 1/2)^(1/4)).
double rank_one_profile_norm_sq();

/// Unnormalized rank-one profile v(a).
double rank_one_profile(double alpha);

}  // namespace gmfg
