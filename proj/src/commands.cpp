#include "gmfg/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>

#include "gmfg/convergence.hpp"
#include "gmfg/errors.hpp"
#include "gmfg/scenario.hpp"

namespace gmfg {
namespace {

constexpr int kOutputSchemaVersion = 1;

std::string run_id(const Scenario& s, const std::string& command) {
  // FNV-1a over the inputs that determine the outputs.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&](const std::string& text) {
    for (unsigned char c : text) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  mix(command);
  mix(scenario_to_json(s).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return s.name + "-" + std::string(buf, 8);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

struct Context {
  Scenario scenario;
  std::filesystem::path out;
  std::string run_id;
  std::ostream& log;
};

double e_n_for(const Scenario& s, const Graphon& limit, int nodes) {
  return sectional_l1_error(limit, step_from_matrix(scenario_adjacency(s, nodes)), s.quadrature_points);
}

nlohmann::json norms_json(const Scenario& s, const PopulationConfig& cfg, const Graphon& limit) {
  const double e_n = e_n_for(s, limit, s.nodes);
  const double e_np = mean_l1_error(s.mu, cfg.mean, s.quadrature_points);
  const int min_c = *std::min_element(cfg.cluster_sizes.begin(), cfg.cluster_sizes.end());
  const double dk = delta_k(e_n, e_np, min_c);
  return {{"E_N", e_n}, {"E_N_prime", e_np}, {"min_cluster", min_c}, {"delta_K", dk}, {"sqrt_delta_K", std::sqrt(dk)}};
}

nlohmann::json header(const Context& c, const char* command) {
  return {{"schema_version", kOutputSchemaVersion},
          {"run_id", c.run_id},
          {"command", command},
          {"scenario", c.scenario.name},
          {"seed", c.scenario.seed},
          {"paths", c.scenario.paths},
          {"config", scenario_to_json(c.scenario)}};
}

void cmd_solve_limit(Context& c) {
  const auto& s = c.scenario;
  const SpectralBasis basis = scenario_basis(s, s.nodes);
  save_basis(c.out / "basis.json", basis);
  const LimitSolution sol = solve_limit(s.model, TimeGrid(s.model.T, s.steps), basis);
  nlohmann::json doc = header(c, "solve-limit");
  doc["solution"] = limit_to_json(sol);
  const auto bound = eigenfunction_bound_check(basis);
  doc["eigenfunction_bound"] = {{"sup_abs", bound.sup_abs}, {"bound", bound.bound}, {"ok", bound.ok}};
  write_json(c.out / "limit_solution.json", doc);
  if (s.mode_paths > 0) {
    const ModePathSet mps = simulate_modes(sol, s.mode_paths, s.seed, s.scheme);
    write_mode_paths_csv(c.out / "mode_paths.csv", sol, mps, s.mode_paths);
  }
  c.log << "solve-limit: " << basis.size() << " mode(s), f(0)=" << sol.f.front() << ", g_ring(0)=" << sol.g_ring.front()
        << " -> " << (c.out / "limit_solution.json").string() << "\n";
}

nlohmann::json sampled_json(const SimOutput& out) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t k = 0; k < out.sampled.size(); ++k) {
    arr.push_back({{"agent", out.sampled[k]},
                   {"J", estimate_to_json(out.sampled_cost[k])},
                   {"J_limit", estimate_to_json(out.limiting_cost[k])}});
  }
  return arr;
}

void cmd_simulate(Context& c, bool deviate) {
  const auto& s = c.scenario;
  const auto deviations = scenario_deviations(s);
  if (deviate && deviations.empty()) throw ValidationError("deviation library is empty");
  const SpectralBasis basis = scenario_basis(s, s.nodes);
  const LimitSolution sol = solve_limit(s.model, TimeGrid(s.model.T, s.steps), basis);
  const PopulationConfig cfg = scenario_population(s, s.nodes);
  const SimOutput out = run_population(cfg, sol, deviate ? deviations : std::vector<DeviationStrategy>{});

  nlohmann::json doc = header(c, deviate ? "deviate" : "simulate");
  doc["N"] = s.nodes;
  doc["agents"] = out.agents;
  doc["scheme"] = scheme_name(s.scheme);
  doc["norms"] = norms_json(s, cfg, scenario_limit_graphon(s, basis));
  doc["sampled"] = sampled_json(out);
  doc["gaps"] = gaps_to_json(out.gaps);
  if (deviate) {
    const EpsilonReport eps = estimate_epsilon(out);
    doc["epsilon"] = epsilon_to_json(eps);
    write_json(c.out / "deviate_summary.json", doc);
    c.log << "deviate: eps_hat=" << eps.eps_hat << " (95% upper " << eps.eps_upper << "), sqrt(delta_K)="
          << doc["norms"]["sqrt_delta_K"].get<double>() << " -> " << (c.out / "deviate_summary.json").string() << "\n";
    return;
  }
  write_json(c.out / "simulate_summary.json", doc);
  write_fields_csv(c.out / "fields.csv", c.run_id, out, sol.grid);
  write_costs_csv(c.out / "costs.csv", c.run_id, out);
  c.log << "simulate: " << out.agents << " agents, " << out.paths << " paths, sup E|z_o - z_bar|^2="
        << out.gaps.z_sq.value.mean << " -> " << c.out.string() << "\n";
}

void cmd_converge(Context& c) {
  const auto& s = c.scenario;
  if (s.ladder.empty()) throw ValidationError("scenario has no [ladder] points");
  if (s.kernel.empty() || s.spectral == Scenario::SpectralMethod::Numeric) {
    throw ValidationError("converge needs a kernel graphon with an analytic or truncated spectral method");
  }
  LadderSetup setup;
  setup.params = s.model;
  setup.grid = TimeGrid(s.model.T, s.steps);
  setup.sampled_from = Graphon::analytic(parse_kernel_name(s.kernel));
  setup.basis = scenario_basis(s, s.nodes);
  setup.limit = scenario_limit_graphon(s, setup.basis);
  setup.mu = s.mu;
  setup.node_rule = s.node_rule;
  setup.variance = s.variances.empty() ? 0.0 : s.variances.front();
  setup.deviations = scenario_deviations(s);
  setup.scheme = s.scheme;
  setup.seed = s.seed;
  setup.paths = s.paths;
  setup.threads = s.threads;
  setup.quadrature_points = s.quadrature_points;
  const ConvergenceReport r = run_ladder(setup, s.ladder);
  nlohmann::json doc = header(c, "converge");
  doc["report"] = report_to_json(r);
  write_json(c.out / "convergence.json", doc);
  write_report_csv(c.out / "convergence.csv", r);
  c.log << "converge: " << r.rows.size() << " ladder point(s) -> " << (c.out / "convergence.json").string() << "\n";
}

}  // namespace

std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag,
                                      const std::filesystem::path& scenario_dir) {
  if (flag) return *flag;
  if (const char* env = std::getenv("GMFG_OUT"); env != nullptr && *env != '\0') return env;
  if (!scenario_dir.empty()) return scenario_dir;
  return "gmfg_out";
}

int run_command(const std::string& command, const std::filesystem::path& scenario_path, const CommandOptions& options,
                std::ostream& log, std::ostream& err) {
  try {
    if (command != "solve-limit" && command != "simulate" && command != "deviate" && command != "converge") {
      throw ConfigError("unknown command '" + command + "'");
    }
    Scenario s = load_scenario(scenario_path);
    if (options.seed) s.seed = *options.seed;
    if (options.paths) {
      if (*options.paths < 1) throw ConfigError("--paths must be >= 1");
      s.paths = *options.paths;
    }
    if (options.threads) {
      if (*options.threads < 1) throw ConfigError("--threads must be >= 1");
      s.threads = *options.threads;
    }
    Context c{s, resolve_out_dir(options.out, s.out_dir), "", log};
    c.run_id = run_id(c.scenario, command);
    std::filesystem::create_directories(c.out);
    nlohmann::json echo = scenario_to_json(c.scenario);
    echo["run_id"] = c.run_id;
    echo["command"] = command;
    write_json(c.out / "resolved_config.json", echo);

    if (command == "solve-limit") cmd_solve_limit(c);
    else if (command == "simulate") cmd_simulate(c, false);
    else if (command == "deviate") cmd_simulate(c, true);
    else cmd_converge(c);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << scenario_path.string() << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const AssumptionViolated& e) {
    err << "assumption violated: " << e.what() << "\n";
    return kExitAssumption;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace gmfg
