#include "gmfg/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "gmfg/errors.hpp"

namespace gmfg {

double delta_k(double e_n, double e_n_prime, int min_cluster) {
  if (!(e_n >= 0.0) || !(e_n_prime >= 0.0)) throw ValidationError("delta_k: norms must be >= 0");
  if (min_cluster < 1) throw ValidationError("delta_k: min cluster size must be >= 1");
  return e_n * e_n + e_n_prime * e_n_prime + 1.0 / static_cast<double>(min_cluster);
}

std::vector<std::string> ladder_metrics() {
  return {"z_sq", "z_abs_sq", "x_sq", "x_abs_sq", "cost_gap", "eps_hat"};
}

std::pair<double, double> ladder_metric(const LadderRow& row, const std::string& name) {
  const auto& g = row.gaps;
  if (name == "z_sq") return {g.z_sq.value.mean, g.z_sq.value.std_error};
  if (name == "z_abs_sq") return {g.z_abs_sq.value.mean, g.z_abs_sq.value.std_error};
  if (name == "x_sq") return {g.x_sq.value.mean, g.x_sq.value.std_error};
  if (name == "x_abs_sq") return {g.x_abs_sq.value.mean, g.x_abs_sq.value.std_error};
  if (name == "cost_gap") return {g.cost_gap_max, g.cost_gap_max_se};
  if (name == "eps_hat") {
    double se = 0.0;
    for (const auto& e : row.epsilon.entries) {
      if (e.advantage.mean == row.epsilon.eps_hat) se = e.advantage.std_error;
    }
    return {row.epsilon.eps_hat, se};
  }
  throw ValidationError("unknown ladder metric " + name);
}

void validate_ladder(const std::vector<LadderPoint>& ladder) {
  if (ladder.empty()) throw ValidationError("ladder is empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (ladder[i].nodes < 1 || ladder[i].cluster_size < 1) {
      throw ValidationError("ladder points need N >= 1 and cluster size >= 1");
    }
    if (i > 0 && (ladder[i].nodes <= ladder[i - 1].nodes || ladder[i].cluster_size <= ladder[i - 1].cluster_size)) {
      throw ValidationError("ladder must be strictly increasing in both N and cluster size");
    }
  }
}

ConvergenceReport run_ladder(const LadderSetup& setup, const std::vector<LadderPoint>& ladder) {
  validate_ladder(ladder);
  ConvergenceReport report;
  for (const auto& pt : ladder) {
    LadderRow row;
    row.point = pt;
    const Eigen::MatrixXd adj = sample_from_graphon(setup.sampled_from, pt.nodes);
    const Graphon step = step_from_matrix(adj);
    const auto means = setup.mu.node_means(pt.nodes, setup.node_rule);
    row.e_n = sectional_l1_error(setup.limit, step, setup.quadrature_points);
    row.e_n_prime = mean_l1_error(setup.mu, means, setup.quadrature_points);
    row.delta = delta_k(row.e_n, row.e_n_prime, pt.cluster_size);
    try {
      const LimitSolution sol = solve_limit(setup.params, setup.grid, setup.basis);
      PopulationConfig cfg;
      cfg.adjacency = adj;
      cfg.cluster_sizes.assign(static_cast<std::size_t>(pt.nodes), pt.cluster_size);
      cfg.mean = means;
      cfg.variance.assign(static_cast<std::size_t>(pt.nodes), setup.variance);
      cfg.seed = setup.seed;
      cfg.paths = setup.paths;
      cfg.threads = setup.threads;
      cfg.trace_paths = 0;
      cfg.scheme = setup.scheme;
      const SimOutput out = run_population(cfg, sol, setup.deviations);
      row.gaps = out.gaps;
      row.epsilon = estimate_epsilon(out);
    } catch (const AssumptionViolated& e) {
      row.feasible = false;
      row.reason = e.what();
    }
    report.rows.push_back(std::move(row));
  }

  for (const auto& name : ladder_metrics()) {
    std::vector<double> lx, ly;
    bool ok = true;
    for (const auto& row : report.rows) {
      if (!row.feasible) continue;
      const double v = ladder_metric(row, name).first;
      if (!(v > 0.0)) {
        ok = false;
        break;
      }
      lx.push_back(std::log(row.delta));
      ly.push_back(std::log(v));
    }
    std::optional<double> slope;
    if (ok && lx.size() >= 2 && std::adjacent_find(lx.begin(), lx.end(), std::not_equal_to<>()) != lx.end()) {
      slope = least_squares_slope(lx, ly);
    }
    report.slopes.emplace_back(name, slope);
  }
  return report;
}

nlohmann::json report_to_json(const ConvergenceReport& r) {
  nlohmann::json j;
  j["schema_version"] = 1;
  auto& rows = j["points"] = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json p{{"N", row.point.nodes},        {"cluster_size", row.point.cluster_size},
                     {"E_N", row.e_n},              {"E_N_prime", row.e_n_prime},
                     {"delta_K", row.delta},        {"sqrt_delta_K", std::sqrt(row.delta)},
                     {"feasible", row.feasible}};
    if (row.feasible) {
      p["gaps"] = gaps_to_json(row.gaps);
      p["epsilon"] = epsilon_to_json(row.epsilon);
    } else {
      p["reason"] = row.reason;
    }
    rows.push_back(std::move(p));
  }
  auto& s = j["slopes"] = nlohmann::json::object();
  for (const auto& [name, v] : r.slopes) s[name] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  return j;
}

void write_report_csv(const std::filesystem::path& path, const ConvergenceReport& r) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << "# schema_version=1\n";
  f << "N,cluster_size,delta_K,metric,value,stderr\n";
  char buf[192];
  for (const auto& row : r.rows) {
    const auto emit = [&](const char* metric, double v, double se) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%s,%.17g,%.17g\n", row.point.nodes, row.point.cluster_size, row.delta,
                    metric, v, se);
      f << buf;
    };
    emit("E_N", row.e_n, 0.0);
    emit("E_N_prime", row.e_n_prime, 0.0);
    if (!row.feasible) continue;
    for (const auto& name : ladder_metrics()) {
      const auto [v, se] = ladder_metric(row, name);
      emit(name.c_str(), v, se);
    }
  }
}

}  // namespace gmfg
