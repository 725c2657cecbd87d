#include "gmfg/eigenfunction.hpp"

#include <algorithm>
#include <cmath>

#include "gmfg/errors.hpp"
#include "gmfg/graphon.hpp"
#include "gmfg/math.hpp"

namespace gmfg {
namespace {

const double kSqrt2 = std::sqrt(2.0);

}  // namespace

double rank_one_profile_norm_sq() { return std::sqrt(1.5) - std::sqrt(0.5); }

double rank_one_profile(double alpha) {
  return 1.0 / (kSqrt2 * std::pow(alpha + 0.5, 0.25));
}

Eigenfunction Eigenfunction::constant() { return {Kind::Constant, 0}; }
Eigenfunction Eigenfunction::cos2pi() { return {Kind::Cos2Pi, 0}; }
Eigenfunction Eigenfunction::sin2pi() { return {Kind::Sin2Pi, 0}; }

Eigenfunction Eigenfunction::half_cosine(int k) {
  if (k <= 0) throw ValidationError("half_cosine: order must be positive");
  return {Kind::HalfCosine, k};
}

Eigenfunction Eigenfunction::rank_one_profile() { return {Kind::RankOne, 0}; }

Eigenfunction Eigenfunction::step(std::vector<double> cell_values) {
  if (cell_values.empty()) throw ValidationError("step eigenfunction needs at least one cell");
  Eigenfunction f{Kind::Step, static_cast<int>(cell_values.size())};
  f.cells_ = std::move(cell_values);
  return f;
}

double Eigenfunction::operator()(double alpha) const {
  switch (kind_) {
    case Kind::Constant:
      return 1.0;
    case Kind::Cos2Pi:
      return kSqrt2 * cospi(2.0 * alpha);
    case Kind::Sin2Pi:
      return kSqrt2 * sinpi(2.0 * alpha);
    case Kind::HalfCosine:
      return kSqrt2 * cospi(order_ * alpha / 2.0);
    case Kind::RankOne:
      return gmfg::rank_one_profile(alpha) / std::sqrt(rank_one_profile_norm_sq());
    case Kind::Step:
      return cells_[static_cast<std::size_t>(AlphaGrid::cell_of(alpha, order_))];
  }
  return 0.0;
}

double Eigenfunction::primitive(double alpha) const {
  switch (kind_) {
    case Kind::Constant:
      return alpha;
    case Kind::Cos2Pi:
      return kSqrt2 / (2.0 * kPi) * sinpi(2.0 * alpha);
    case Kind::Sin2Pi:
      return kSqrt2 / (2.0 * kPi) * (1.0 - cospi(2.0 * alpha));
    case Kind::HalfCosine:
      return 2.0 * kSqrt2 / (order_ * kPi) * sinpi(order_ * alpha / 2.0);
    case Kind::RankOne: {
      const double scale = 1.0 / (kSqrt2 * std::sqrt(rank_one_profile_norm_sq()));
      return scale * (4.0 / 3.0) * (std::pow(alpha + 0.5, 0.75) - std::pow(0.5, 0.75));
    }
    case Kind::Step: {
      const double n = static_cast<double>(order_);
      const double pos = std::clamp(alpha, 0.0, 1.0) * n;
      const auto full = static_cast<std::size_t>(std::min(std::floor(pos), n));
      double acc = 0.0;
      for (std::size_t j = 0; j < full; ++j) acc += cells_[j];
      if (full < cells_.size()) acc += cells_[full] * (pos - static_cast<double>(full));
      return acc / n;
    }
  }
  return 0.0;
}

double Eigenfunction::cell_average(int q, int cells) const {
  const double n = static_cast<double>(cells);
  return n * integral(q / n, (q + 1) / n);
}

double Eigenfunction::sup_abs() const {
  switch (kind_) {
    case Kind::Constant:
      return 1.0;
    case Kind::Cos2Pi:
    case Kind::Sin2Pi:
    case Kind::HalfCosine:
      return kSqrt2;
    case Kind::RankOne:
      return gmfg::rank_one_profile(0.0) / std::sqrt(rank_one_profile_norm_sq());
    case Kind::Step: {
      double m = 0.0;
      for (double v : cells_) m = std::max(m, std::fabs(v));
      return m;
    }
  }
  return 0.0;
}

std::string Eigenfunction::label() const {
  switch (kind_) {
    case Kind::Constant:
      return "constant";
    case Kind::Cos2Pi:
      return "cos2pi";
    case Kind::Sin2Pi:
      return "sin2pi";
    case Kind::HalfCosine:
      return "half_cosine";
    case Kind::RankOne:
      return "rank_one_profile";
    case Kind::Step:
      return "step";
  }
  return "unknown";
}

}  // namespace gmfg
