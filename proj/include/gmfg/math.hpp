#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gmfg {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// sin(pi x) and cos(pi x) with exact zeros and units at integer and
// half-integer arguments, so closed-form cell integrals of trigonometric
// eigenfunctions vanish exactly where they should.
double sinpi(double x);
double cospi(double x);

/// (e^x - 1) / x, continuous at 0.
double expm1_over_x(double x);

/// Sample mean and standard error of the mean.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};

/// Welford mean/variance accumulator. Merging is order-sensitive in floating
/// point; callers merge in a fixed order for reproducibility.
struct MomentAccumulator {
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t count = 0;

  void add(double v);
  void merge(const MomentAccumulator& other);
  MeanEstimate estimate() const;
};

/// Least-squares slope of y against x; requires at least two distinct x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

}  // namespace gmfg
