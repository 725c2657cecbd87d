#include "gmfg/math.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmfg {

double sinpi(double x) {
  double r = std::remainder(x, 2.0);  // [-1, 1]
  if (r == 0.0 || r == 1.0 || r == -1.0) return 0.0;
  if (r == 0.5) return 1.0;
  if (r == -0.5) return -1.0;
  if (r > 0.5) r = 1.0 - r;
  else if (r < -0.5) r = -1.0 - r;
  return std::sin(kPi * r);
}

double cospi(double x) {
  double r = std::fabs(std::remainder(x, 2.0));  // [0, 1]
  if (r == 0.0) return 1.0;
  if (r == 0.5) return 0.0;
  if (r == 1.0) return -1.0;
  if (r > 0.5) return -std::cos(kPi * (1.0 - r));
  return std::cos(kPi * r);
}

double expm1_over_x(double x) {
  if (std::fabs(x) < 1e-8) return 1.0 + 0.5 * x;
  return std::expm1(x) / x;
}

void MomentAccumulator::add(double v) {
  ++count;
  const double delta = v - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (v - mean);
}

void MomentAccumulator::merge(const MomentAccumulator& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double na = static_cast<double>(count);
  const double nb = static_cast<double>(other.count);
  const double n = na + nb;
  const double delta = other.mean - mean;
  mean += delta * (nb / n);
  m2 += other.m2 + delta * delta * (na * nb / n);
  count += other.count;
}

MeanEstimate MomentAccumulator::estimate() const {
  MeanEstimate e;
  e.count = count;
  e.mean = mean;
  if (count > 1) {
    const double n = static_cast<double>(count);
    e.std_error = std::sqrt(std::max(m2, 0.0) / (n - 1.0) / n);
  }
  return e;
}

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("least_squares_slope: need at least two points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("least_squares_slope: degenerate abscissae");
  return sxy / sxx;
}

}  // namespace gmfg
