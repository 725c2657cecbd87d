#include "gmfg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "gmfg/errors.hpp"
#include "gmfg/math.hpp"
#include "gmfg/simd/kernels.hpp"

namespace gmfg {

Graphon SpectralBasis::graphon() const {
  std::vector<FiniteRankTerm> terms;
  terms.reserve(pairs.size());
  for (const auto& p : pairs) terms.push_back({p.lambda, p.f});
  return Graphon::finite_rank(std::move(terms));
}

void attach_mean(SpectralBasis& basis, const MeanProfile& mu) {
  for (auto& p : basis.pairs) {
    p.inner_one = p.f.mean();
    p.inner_mu = mu.inner(p.f);
  }
}

SpectralBasis uniform_attachment_truncation(int modes, const MeanProfile& mu) {
  if (modes < 1) throw ValidationError("uniform_attachment truncation needs at least one mode");
  SpectralBasis b;
  b.source = "uniform_attachment{modes=" + std::to_string(modes) + "}";
  for (int i = 0; i < modes; ++i) {
    const int k = 2 * i + 1;
    const double kp = k * kPi;
    b.pairs.push_back({4.0 / (kp * kp), Eigenfunction::half_cosine(k), 0.0, 0.0});
  }
  attach_mean(b, mu);
  return b;
}

SpectralBasis analytic_eigenpairs(const AnalyticKernel& kernel, const MeanProfile& mu, int modes) {
  SpectralBasis b;
  switch (kernel.kind) {
    case AnalyticKernel::Kind::Sinusoidal:
      b.source = kernel.name();
      b.pairs.push_back({-0.5, Eigenfunction::cos2pi(), 0.0, 0.0});
      b.pairs.push_back({-0.5, Eigenfunction::sin2pi(), 0.0, 0.0});
      break;
    case AnalyticKernel::Kind::UniformAttachment:
      if (modes < 1) {
        throw ValidationError("uniform_attachment is infinite rank; a truncation mode count is required");
      }
      return uniform_attachment_truncation(modes, mu);
    case AnalyticKernel::Kind::RankOne:
      if (kernel.amplitude == 0.0) throw ValidationError("rank_one with a = 0 has no nonzero eigenvalue");
      b.source = kernel.name();
      b.pairs.push_back({kernel.amplitude * rank_one_profile_norm_sq(), Eigenfunction::rank_one_profile(), 0.0, 0.0});
      break;
  }
  attach_mean(b, mu);
  return b;
}

SpectralBasis numeric_eigenpairs(const Graphon& step, int d, const MeanProfile& mu) {
  const auto* s = step.as_step();
  if (s == nullptr) throw ValidationError("numeric_eigenpairs needs a step graphon");
  const int n = s->size();
  if (d < 1 || d > n) {
    throw ValidationError("numeric_eigenpairs: need 1 <= d <= N (d=" + std::to_string(d) +
                          ", N=" + std::to_string(n) + ")");
  }
  const Eigen::MatrixXd scaled = s->values / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scaled);
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigensolver failed");
  const Eigen::VectorXd& values = solver.eigenvalues();

  std::vector<int> idx;
  for (int i = 0; i < n; ++i) {
    if (std::fabs(values[i]) > kRankCutoff) idx.push_back(i);
  }
  if (static_cast<int>(idx.size()) < d) {
    throw ValidationError("step graphon has rank " + std::to_string(idx.size()) + ", fewer than the " +
                          std::to_string(d) + " requested modes");
  }
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double la = std::fabs(values[a]), lb = std::fabs(values[b]);
    if (la != lb) return la > lb;
    return values[a] > values[b];
  });

  SpectralBasis b;
  b.source = "numeric{N=" + std::to_string(n) + ",d=" + std::to_string(d) + "}";
  const double root_n = std::sqrt(static_cast<double>(n));
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v = solver.eigenvectors().col(idx[static_cast<std::size_t>(i)]);
    const double floor = 1e-12 * v.cwiseAbs().maxCoeff();
    for (int j = 0; j < n; ++j) {
      if (std::fabs(v[j]) > floor) {
        if (v[j] < 0.0) v = -v;
        break;
      }
    }
    std::vector<double> cells(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) cells[static_cast<std::size_t>(j)] = root_n * v[j];
    b.pairs.push_back({values[idx[static_cast<std::size_t>(i)]], Eigenfunction::step(std::move(cells)), 0.0, 0.0});
  }
  attach_mean(b, mu);
  return b;
}

Eigen::MatrixXd orthonormality_residual(const SpectralBasis& basis, int cells, int m) {
  if (basis.pairs.empty()) throw ValidationError("orthonormality_residual: empty basis");
  // A grid aligned with every step partition in the basis integrates products
  // of step functions exactly.
  int grid_cells = cells;
  bool all_step = true;
  int step_lcm = 1;
  for (const auto& p : basis.pairs) {
    if (p.f.kind() == Eigenfunction::Kind::Step) {
      step_lcm = std::lcm(step_lcm, p.f.order());
    } else {
      all_step = false;
    }
  }
  if (all_step) grid_cells = step_lcm;
  const AlphaGrid grid(grid_cells, all_step ? 1 : m);
  std::vector<std::vector<double>> values;
  for (const auto& p : basis.pairs) values.push_back(grid.sample([&](double a) { return p.f(a); }));

  const auto d = static_cast<Eigen::Index>(basis.pairs.size());
  Eigen::MatrixXd r(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      r(i, j) = grid.weight() * simd::dot(values[i], values[j]) - (i == j ? 1.0 : 0.0);
    }
  }
  return r;
}

BoundReport eigenfunction_bound_check(const SpectralBasis& basis) {
  BoundReport r;
  double min_lambda = INFINITY;
  for (const auto& p : basis.pairs) {
    if (p.lambda == 0.0) throw ValidationError("eigenfunction_bound_check: zero eigenvalue");
    min_lambda = std::min(min_lambda, std::fabs(p.lambda));
  }
  r.bound = 1.0 / min_lambda;
  for (const auto& p : basis.pairs) {
    const double s = p.f.sup_abs();
    r.sup_abs.push_back(s);
    const bool bad = s > r.bound + 1e-6;
    r.violated.push_back(bad);
    if (bad) r.ok = false;
  }
  return r;
}

double truncation_sectional_error(int cells, int modes, int points_per_cell) {
  const auto truncated = uniform_attachment_truncation(modes, MeanProfile::constant(0.0)).graphon();
  return sectional_l1_distance(truncated, Graphon::uniform_attachment(), cells, points_per_cell);
}

double truncation_tail_bound(int modes) {
  double partial = 0.0;
  for (int i = 0; i < modes; ++i) {
    const double k = 2.0 * i + 1.0;
    partial += 1.0 / (k * k);
  }
  return 16.0 / (kPi * kPi * kPi) * (kPi * kPi / 8.0 - partial);
}

std::vector<double> eigen_equation_residual(const Graphon& g, const SpectralBasis& basis, int cells, int m) {
  const AlphaGrid grid(cells, m);
  std::vector<double> out;
  for (const auto& p : basis.pairs) {
    const auto phi = grid.sample([&](double a) { return p.f(a); });
    const auto mphi = apply_operator(g, grid, phi);
    double worst = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) worst = std::max(worst, std::fabs(mphi[k] - p.lambda * phi[k]));
    out.push_back(worst);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json function_to_json(const Eigenfunction& f) {
  nlohmann::json j;
  j["kind"] = f.label();
  if (f.kind() == Eigenfunction::Kind::HalfCosine) j["k"] = f.order();
  if (f.kind() == Eigenfunction::Kind::Step) {
    j["cells"] = std::vector<double>(f.cell_values().begin(), f.cell_values().end());
  }
  return j;
}

Eigenfunction function_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return Eigenfunction::constant();
  if (kind == "cos2pi") return Eigenfunction::cos2pi();
  if (kind == "sin2pi") return Eigenfunction::sin2pi();
  if (kind == "half_cosine") return Eigenfunction::half_cosine(j.at("k").get<int>());
  if (kind == "rank_one_profile") return Eigenfunction::rank_one_profile();
  if (kind == "step") return Eigenfunction::step(j.at("cells").get<std::vector<double>>());
  throw ValidationError("unknown eigenfunction kind: " + kind);
}

}  // namespace

nlohmann::json basis_to_json(const SpectralBasis& basis) {
  nlohmann::json doc;
  doc["schema_version"] = 1;
  doc["source"] = basis.source;
  auto& arr = doc["pairs"] = nlohmann::json::array();
  for (const auto& p : basis.pairs) {
    arr.push_back({{"lambda", p.lambda},
                   {"eigenfunction", function_to_json(p.f)},
                   {"inner_one", p.inner_one},
                   {"inner_mu", p.inner_mu}});
  }
  return doc;
}

SpectralBasis basis_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("schema_version").get<int>() != 1) throw ValidationError("unsupported basis schema_version");
    SpectralBasis b;
    b.source = doc.at("source").get<std::string>();
    for (const auto& p : doc.at("pairs")) {
      b.pairs.push_back({p.at("lambda").get<double>(), function_from_json(p.at("eigenfunction")),
                         p.at("inner_one").get<double>(), p.at("inner_mu").get<double>()});
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed basis JSON: ") + e.what());
  }
}

void save_basis(const std::filesystem::path& path, const SpectralBasis& basis) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << basis_to_json(basis).dump(2) << "\n";
}

SpectralBasis load_basis(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open basis file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return basis_from_json(doc);
}

}  // namespace gmfg
