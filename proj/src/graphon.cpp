#include "gmfg/graphon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gmfg/errors.hpp"
#include "gmfg/math.hpp"
#include "gmfg/simd/kernels.hpp"

namespace gmfg {

// ---------------------------------------------------------------------------
// AlphaGrid

AlphaGrid::AlphaGrid(int cells, int points_per_cell)
    : cells_(cells), per_cell_(points_per_cell) {
  if (cells < 1) throw ValidationError("AlphaGrid: need at least one cell");
  if (points_per_cell < 1) throw ValidationError("AlphaGrid: need at least one point per cell");
  const std::size_t n = static_cast<std::size_t>(cells) * static_cast<std::size_t>(points_per_cell);
  weight_ = 1.0 / static_cast<double>(n);
  nodes_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    nodes_[k] = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
  }
}

double AlphaGrid::integrate(std::span<const double> values) const {
  if (values.size() != nodes_.size()) throw ValidationError("AlphaGrid: grid function size mismatch");
  return weight_ * simd::sum(values);
}

double AlphaGrid::cell_integral(std::span<const double> values, int q) const {
  if (values.size() != nodes_.size()) throw ValidationError("AlphaGrid: grid function size mismatch");
  if (q < 0 || q >= cells_) throw DomainError("AlphaGrid: cell index out of range");
  return weight_ * simd::sum(values.subspan(static_cast<std::size_t>(q) * per_cell_, per_cell_));
}

int AlphaGrid::cell_of(double alpha, int cells) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("cell_of: coordinate outside [0,1]");
  const int q = static_cast<int>(std::floor(alpha * cells));
  return std::min(q, cells - 1);
}

// ---------------------------------------------------------------------------
// Row evaluation on a node set. Finite-rank kernels are expanded once so a
// row costs d fused passes instead of 2d eigenfunction evaluations per entry.

namespace {

class RowEvaluator {
 public:
  RowEvaluator(const Graphon& g, std::span<const double> nodes) : g_(g), nodes_(nodes) {
    if (const auto* fr = g.as_finite_rank()) {
      const std::size_t n = nodes.size();
      for (const auto& t : fr->terms) {
        lambdas_.push_back(t.lambda);
        std::vector<double> v(n);
        for (std::size_t j = 0; j < n; ++j) v[j] = t.f(nodes[j]);
        values_.push_back(std::move(v));
      }
    }
  }

  void row(std::size_t k, std::span<double> out) const {
    const std::size_t n = nodes_.size();
    if (!values_.empty()) {
      std::fill(out.begin(), out.end(), 0.0);
      for (std::size_t l = 0; l < values_.size(); ++l) {
        const double lam = lambdas_[l];
        const auto& v = values_[l];
        const double vk = v[k];
        for (std::size_t j = 0; j < n; ++j) out[j] += lam * (vk * v[j]);
      }
      return;
    }
    const double a = nodes_[k];
    for (std::size_t j = 0; j < n; ++j) out[j] = g_.value(a, nodes_[j]);
  }

 private:
  const Graphon& g_;
  std::span<const double> nodes_;
  std::vector<double> lambdas_;
  std::vector<std::vector<double>> values_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Kernels

double AnalyticKernel::operator()(double a, double b) const {
  switch (kind) {
    case Kind::Sinusoidal:
      return -cospi(2.0 * (a - b));
    case Kind::UniformAttachment:
      return 1.0 - std::max(a, b);
    case Kind::RankOne:
      return amplitude * rank_one_profile(a) * rank_one_profile(b);
  }
  return 0.0;
}

std::string AnalyticKernel::name() const {
  switch (kind) {
    case Kind::Sinusoidal:
      return "sinusoidal";
    case Kind::UniformAttachment:
      return "uniform_attachment";
    case Kind::RankOne: {
      std::ostringstream os;
      os.precision(17);
      os << "rank_one{a=" << amplitude << "}";
      return os.str();
    }
  }
  return "unknown";
}

AnalyticKernel parse_kernel_name(const std::string& text) {
  if (text == "sinusoidal") return {AnalyticKernel::Kind::Sinusoidal, 1.0};
  if (text == "uniform_attachment") return {AnalyticKernel::Kind::UniformAttachment, 1.0};
  const std::string prefix = "rank_one{a=";
  if (text.rfind(prefix, 0) == 0 && text.size() > prefix.size() + 1 && text.back() == '}') {
    const std::string num = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    std::size_t used = 0;
    double a = 0.0;
    try {
      a = std::stod(num, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != num.size() || used == 0) throw ValidationError("bad rank_one amplitude: " + text);
    if (!(std::fabs(a) <= 1.0)) throw ValidationError("rank_one amplitude must lie in [-1, 1]");
    return {AnalyticKernel::Kind::RankOne, a};
  }
  throw ValidationError("unknown kernel: " + text);
}

double FiniteRankKernel::operator()(double a, double b) const {
  double s = 0.0;
  for (const auto& t : terms) s += t.lambda * (t.f(a) * t.f(b));
  return s;
}

double StepKernel::operator()(double a, double b) const {
  const int n = size();
  return values(AlphaGrid::cell_of(a, n), AlphaGrid::cell_of(b, n));
}

// ---------------------------------------------------------------------------
// Graphon

Graphon Graphon::analytic(AnalyticKernel kernel) { return Graphon(Rep{kernel}); }
Graphon Graphon::sinusoidal() { return analytic({AnalyticKernel::Kind::Sinusoidal, 1.0}); }
Graphon Graphon::uniform_attachment() {
  return analytic({AnalyticKernel::Kind::UniformAttachment, 1.0});
}
Graphon Graphon::rank_one(double amplitude) {
  if (!(std::fabs(amplitude) <= 1.0)) throw ValidationError("rank_one amplitude must lie in [-1, 1]");
  return analytic({AnalyticKernel::Kind::RankOne, amplitude});
}

Graphon Graphon::finite_rank(std::vector<FiniteRankTerm> terms) {
  if (terms.empty()) throw ValidationError("finite-rank graphon needs at least one term");
  return Graphon(Rep{FiniteRankKernel{std::move(terms)}});
}

Graphon::Kind Graphon::kind() const noexcept {
  switch (rep_.index()) {
    case 0:
      return Kind::Analytic;
    case 1:
      return Kind::FiniteRank;
    default:
      return Kind::Step;
  }
}

double Graphon::value(double a, double b) const {
  return std::visit([a, b](const auto& k) { return k(a, b); }, rep_);
}

double Graphon::operator()(double a, double b) const {
  if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0)) {
    throw DomainError("graphon evaluated outside [0,1]^2");
  }
  return value(a, b);
}

std::string Graphon::describe() const {
  if (const auto* k = as_analytic()) return k->name();
  if (const auto* f = as_finite_rank()) return "finite_rank{" + std::to_string(f->terms.size()) + "}";
  return "step{N=" + std::to_string(as_step()->size()) + "}";
}

void validate_adjacency(const Eigen::MatrixXd& m) {
  if (m.rows() == 0 || m.rows() != m.cols()) throw ValidationError("adjacency matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      if (!(v >= -1.0 && v <= 1.0)) {
        throw ValidationError("adjacency entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) +
                              ") outside [-1, 1]");
      }
      if (v != m(j, i)) {
        throw ValidationError("adjacency matrix is not symmetric at (" + std::to_string(i + 1) + "," +
                              std::to_string(j + 1) + ")");
      }
    }
  }
}

Graphon step_from_matrix(const Eigen::MatrixXd& m) {
  validate_adjacency(m);
  return Graphon(Graphon::Rep{StepKernel{m}});
}

Eigen::MatrixXd sample_from_graphon(const Graphon& g, int nodes) {
  if (nodes < 1) throw ValidationError("sample_from_graphon: N must be positive");
  Eigen::MatrixXd m(nodes, nodes);
  const double n = static_cast<double>(nodes);
  for (int i = 0; i < nodes; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = g(i / n, j / n);
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

std::vector<double> apply_operator(const Graphon& g, const AlphaGrid& grid,
                                   std::span<const double> phi) {
  if (phi.size() != grid.size()) throw ValidationError("apply_operator: grid function size mismatch");
  const RowEvaluator rows(g, grid.nodes());
  std::vector<double> row(grid.size());
  std::vector<double> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    rows.row(k, row);
    out[k] = grid.weight() * simd::dot(row, phi);
  }
  return out;
}

double sectional_l1_distance(const Graphon& a, const Graphon& b, int cells, int points_per_cell) {
  const AlphaGrid grid(cells, points_per_cell);
  const std::size_t n = grid.size();
  const std::size_t m = static_cast<std::size_t>(points_per_cell);
  const RowEvaluator rows_a(a, grid.nodes());
  const RowEvaluator rows_b(b, grid.nodes());
  std::vector<double> diff(n);
  std::vector<double> other(n);
  std::vector<double> outer(static_cast<std::size_t>(cells), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    rows_a.row(k, diff);
    rows_b.row(k, other);
    for (std::size_t j = 0; j < n; ++j) diff[j] -= other[j];
    for (int q = 0; q < cells; ++q) {
      const double inner =
          grid.weight() * simd::sum(std::span<const double>(diff).subspan(q * m, m));
      outer[static_cast<std::size_t>(q)] += grid.weight() * std::fabs(inner);
    }
  }
  return static_cast<double>(cells) * *std::max_element(outer.begin(), outer.end());
}

double sectional_l1_error(const Graphon& limit, const Graphon& step, int points_per_cell) {
  const auto* s = step.as_step();
  if (s == nullptr) throw ValidationError("sectional_l1_error: second argument must be a step graphon");
  return sectional_l1_distance(limit, step, s->size(), points_per_cell);
}

// ---------------------------------------------------------------------------
// MeanProfile

MeanProfile MeanProfile::constant(double c) {
  MeanProfile p;
  p.kind_ = Kind::Constant;
  p.p0_ = c;
  return p;
}

MeanProfile MeanProfile::linear(double intercept, double slope) {
  MeanProfile p;
  p.kind_ = Kind::Linear;
  p.p0_ = intercept;
  p.p1_ = slope;
  return p;
}

MeanProfile MeanProfile::cosine(double offset, double amplitude) {
  MeanProfile p;
  p.kind_ = Kind::Cosine;
  p.p0_ = offset;
  p.p1_ = amplitude;
  return p;
}

MeanProfile MeanProfile::node_vector(std::vector<double> node_means) {
  if (node_means.empty()) throw ValidationError("node mean vector is empty");
  MeanProfile p;
  p.kind_ = Kind::NodeVector;
  p.values_ = std::move(node_means);
  return p;
}

double MeanProfile::operator()(double alpha) const {
  switch (kind_) {
    case Kind::Constant:
      return p0_;
    case Kind::Linear:
      return p0_ + p1_ * alpha;
    case Kind::Cosine:
      return p0_ + p1_ * cospi(2.0 * alpha);
    case Kind::NodeVector:
      return values_[static_cast<std::size_t>(AlphaGrid::cell_of(alpha, static_cast<int>(values_.size())))];
  }
  return 0.0;
}

double MeanProfile::sup_abs() const {
  switch (kind_) {
    case Kind::Constant:
      return std::fabs(p0_);
    case Kind::Linear:
      return std::max(std::fabs(p0_), std::fabs(p0_ + p1_));
    case Kind::Cosine:
      return std::fabs(p0_) + std::fabs(p1_);
    case Kind::NodeVector: {
      double m = 0.0;
      for (double v : values_) m = std::max(m, std::fabs(v));
      return m;
    }
  }
  return 0.0;
}

double MeanProfile::cell_average(int q, int cells) const {
  const double n = static_cast<double>(cells);
  switch (kind_) {
    case Kind::Constant:
      return p0_;
    case Kind::Linear:
      return p0_ + p1_ * (q + 0.5) / n;
    case Kind::Cosine:
      return p0_ + p1_ * n / (2.0 * kPi) * (sinpi(2.0 * (q + 1) / n) - sinpi(2.0 * q / n));
    case Kind::NodeVector: {
      const auto f = Eigenfunction::step(values_);
      return f.cell_average(q, cells);
    }
  }
  return 0.0;
}

std::vector<double> MeanProfile::node_means(int cells, NodeRule rule) const {
  if (kind_ == Kind::NodeVector) {
    if (static_cast<int>(values_.size()) != cells) {
      throw ValidationError("node mean vector has " + std::to_string(values_.size()) +
                            " entries, graph has " + std::to_string(cells) + " nodes");
    }
    return values_;
  }
  std::vector<double> out(static_cast<std::size_t>(cells));
  for (int q = 0; q < cells; ++q) {
    out[static_cast<std::size_t>(q)] =
        rule == NodeRule::Sample ? (*this)(q / static_cast<double>(cells)) : cell_average(q, cells);
  }
  return out;
}

double MeanProfile::inner(const Eigenfunction& f, int resolution) const {
  if (kind_ == Kind::Constant) return p0_ * f.mean();
  if (kind_ == Kind::NodeVector) {
    const double n = static_cast<double>(values_.size());
    double s = 0.0;
    for (std::size_t q = 0; q < values_.size(); ++q) {
      s += values_[q] * f.integral(static_cast<double>(q) / n, static_cast<double>(q + 1) / n);
    }
    return s;
  }
  const AlphaGrid grid(1, resolution);
  const auto mu = grid.sample([this](double a) { return (*this)(a); });
  const auto fv = grid.sample([&f](double a) { return f(a); });
  return grid.weight() * simd::dot(mu, fv);
}

std::string MeanProfile::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind_) {
    case Kind::Constant:
      os << "constant{c=" << p0_ << "}";
      break;
    case Kind::Linear:
      os << "linear{a=" << p0_ << ",b=" << p1_ << "}";
      break;
    case Kind::Cosine:
      os << "cosine{a=" << p0_ << ",b=" << p1_ << "}";
      break;
    case Kind::NodeVector:
      os << "node_vector{N=" << values_.size() << "}";
      break;
  }
  return os.str();
}

double mean_l1_error(const MeanProfile& mu, std::span<const double> node_means, int points_per_cell) {
  if (node_means.empty()) throw ValidationError("mean_l1_error: empty node mean vector");
  const AlphaGrid grid(static_cast<int>(node_means.size()), points_per_cell);
  std::vector<double> gap(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    gap[k] = std::fabs(node_means[static_cast<std::size_t>(grid.cell_of_node(k))] - mu(grid.node(k)));
  }
  return grid.integrate(gap);
}

// ---------------------------------------------------------------------------
// Cut norm

namespace {

// Best |sum_{i in S, j in T} C_ij| for fixed S, choosing T optimally.
double best_for_rows(const Eigen::VectorXd& colsum) {
  double pos = 0.0, neg = 0.0;
  for (Eigen::Index j = 0; j < colsum.size(); ++j) {
    if (colsum[j] > 0.0) pos += colsum[j];
    else neg -= colsum[j];
  }
  return std::max(pos, neg);
}

double greedy_cut(const Eigen::MatrixXd& c) {
  const Eigen::Index r = c.rows();
  double best = 0.0;
  for (int sign : {1, -1}) {
    std::vector<Eigen::VectorXd> starts;
    for (Eigen::Index i = 0; i < r; ++i) starts.push_back(Eigen::VectorXd::Unit(r, i));
    starts.push_back(Eigen::VectorXd::Ones(r));
    for (const auto& start : starts) {
      Eigen::VectorXd s = start;
      double value = -1.0;
      for (int iter = 0; iter < 100; ++iter) {
        const Eigen::VectorXd colsum = c.transpose() * s;
        Eigen::VectorXd t = (sign * colsum.array() > 0.0).cast<double>();
        const Eigen::VectorXd rowsum = c * t;
        Eigen::VectorXd s_next = (sign * rowsum.array() > 0.0).cast<double>();
        const double v = sign * s_next.dot(rowsum);
        if (v <= value) break;
        value = v;
        s = s_next;
      }
      best = std::max(best, value);
    }
  }
  return best;
}

}  // namespace

CutNormEstimate cut_norm_lower_bound(const Graphon& g, int resolution, int points_per_cell) {
  if (resolution < 1) throw ValidationError("cut_norm_lower_bound: resolution must be positive");
  const AlphaGrid grid(resolution, points_per_cell);
  const int m = points_per_cell;
  const RowEvaluator rows(g, grid.nodes());
  std::vector<double> row(grid.size());
  Eigen::MatrixXd cells = Eigen::MatrixXd::Zero(resolution, resolution);
  const double w2 = grid.weight() * grid.weight();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    rows.row(k, row);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      cells(static_cast<Eigen::Index>(k) / m, static_cast<Eigen::Index>(j) / m) += w2 * row[j];
    }
  }

  CutNormEstimate est;
  if (resolution <= kCutNormExhaustiveCap) {
    est.exhaustive = true;
    // Gray-code walk over every row subset S.
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(resolution);
    const std::uint64_t count = std::uint64_t{1} << resolution;
    std::uint64_t prev = 0;
    for (std::uint64_t idx = 1; idx < count; ++idx) {
      const std::uint64_t gray = idx ^ (idx >> 1);
      const std::uint64_t flipped = gray ^ prev;
      const int row = __builtin_ctzll(flipped);
      if (gray & flipped) colsum += cells.row(row).transpose();
      else colsum -= cells.row(row).transpose();
      prev = gray;
      est.value = std::max(est.value, best_for_rows(colsum));
    }
  } else {
    est.value = greedy_cut(cells);
  }
  return est;
}

// ---------------------------------------------------------------------------
// CSV

void save_adjacency_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  validate_adjacency(m);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "# gmfg-adjacency v1, N=" << m.rows() << "\n";
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

Eigen::MatrixXd load_adjacency_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open adjacency file " + path.string());
  std::string line;
  std::getline(in, line);
  const std::string prefix = "# gmfg-adjacency v1, N=";
  if (line.rfind(prefix, 0) != 0) throw ValidationError(path.string() + ":1: missing gmfg-adjacency v1 header");
  int n = 0;
  try {
    n = std::stoi(line.substr(prefix.size()));
  } catch (const std::exception&) {
    throw ValidationError(path.string() + ":1: bad N in header");
  }
  if (n < 1) throw ValidationError(path.string() + ":1: N must be positive");
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    if (!std::getline(in, line)) {
      throw ValidationError(path.string() + ": expected " + std::to_string(n) + " rows");
    }
    std::stringstream ss(line);
    std::string cell;
    int j = 0;
    while (std::getline(ss, cell, ',')) {
      if (j >= n) throw ValidationError(path.string() + ":" + std::to_string(i + 2) + ": too many columns");
      try {
        std::size_t used = 0;
        m(i, j) = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw ValidationError(path.string() + ":" + std::to_string(i + 2) + ": bad number '" + cell + "'");
      }
      ++j;
    }
    if (j != n) throw ValidationError(path.string() + ":" + std::to_string(i + 2) + ": too few columns");
  }
  validate_adjacency(m);
  return m;
}

}  // namespace gmfg
