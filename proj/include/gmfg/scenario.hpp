#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "gmfg/convergence.hpp"
#include "gmfg/graphon.hpp"
#include "gmfg/limit_solver.hpp"
#include "gmfg/popsim.hpp"
#include "gmfg/spectral.hpp"

namespace gmfg {

inline constexpr int kScenarioSchemaVersion = 1;

struct Scenario {
  std::string name;
  std::filesystem::path source;  // scenario file, for resolving relative paths

  ModelParams model;
  int steps = 200;
  SdeScheme scheme = SdeScheme::Euler;

  // [graphon]: exactly one of kernel / adjacency
  std::string kernel;
  std::filesystem::path adjacency;
  int nodes = 0;  // N for kernel scenarios; taken from the file otherwise
  int quadrature_points = 8;

  enum class SpectralMethod { Analytic, Numeric, Truncated };
  SpectralMethod spectral = SpectralMethod::Analytic;
  int modes = 0;

  MeanProfile mu = MeanProfile::constant(0.0);
  MeanProfile::NodeRule node_rule = MeanProfile::NodeRule::Sample;

  std::vector<int> cluster_sizes;   // resolved to N entries
  std::vector<double> variances;    // resolved to N entries
  std::size_t paths = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<std::size_t> sampled_agents;
  std::size_t trace_paths = 4;

  std::vector<std::string> deviations;
  std::vector<LadderPoint> ladder;

  std::filesystem::path out_dir;
  std::size_t mode_paths = 0;  // mode paths exported as CSV by solve-limit
};

/// Parses and validates a scenario file. Errors carry the offending line.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text, const std::filesystem::path& source = "<string>");

/// Fully resolved configuration (defaults filled in).
nlohmann::json scenario_to_json(const Scenario& s);

/// Adjacency of the finite graph at N nodes (sampled, or loaded from file).
Eigen::MatrixXd scenario_adjacency(const Scenario& s, int nodes);
/// Spectral basis of the limit game; numeric bases come from the N-node graph.
SpectralBasis scenario_basis(const Scenario& s, int nodes);
/// Graphon E_N is measured against.
Graphon scenario_limit_graphon(const Scenario& s, const SpectralBasis& basis);
PopulationConfig scenario_population(const Scenario& s, int nodes, int cluster_size_override = 0);
std::vector<DeviationStrategy> scenario_deviations(const Scenario& s);

}  // namespace gmfg
