#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "gmfg/limit_solver.hpp"
#include "gmfg/math.hpp"

namespace gmfg {

struct PopulationConfig {
  Eigen::MatrixXd adjacency;        // N x N, symmetric, entries in [-1, 1]
  std::vector<int> cluster_sizes;   // |C_q|
  std::vector<double> mean;         // mu_q
  std::vector<double> variance;     // v_q
  std::uint64_t seed = 0;
  std::size_t paths = 1;
  std::vector<std::size_t> sampled_agents;  // empty: default_sampled_agents()
  std::size_t trace_paths = 4;      // paths whose fields and sampled trajectories are kept
  SdeScheme scheme = SdeScheme::Euler;
  int threads = 1;

  int nodes() const { return static_cast<int>(cluster_sizes.size()); }
  std::size_t agents() const;
  /// First global agent index of every cluster, plus the total at the end.
  std::vector<std::size_t> cluster_starts() const;
  int cluster_of(std::size_t agent) const;
  void validate() const;
};

/// First agent of cluster 0 and of cluster N/2, plus the first agent of any
/// cluster whose size is not yet represented.
std::vector<std::size_t> default_sampled_agents(const PopulationConfig& cfg);

/// Per-path noise and initial states: a pure function of (seed, path, agent).
struct PathBundle {
  std::size_t path = 0;
  std::size_t agents = 0, steps = 0;
  std::vector<double> dW0;  // steps
  std::vector<double> dw;   // steps x agents, time-major
  std::vector<double> x0;   // agents
};

void fill_bundle(const PopulationConfig& cfg, const TimeGrid& grid, std::size_t path, PathBundle& out);

/// Limit-game fields along one common-noise path.
struct PathFields {
  std::vector<double> z, g;         // nodes x d mode states
  std::vector<double> z_bar, g_bar; // nodes x N cluster projections
};

void fill_fields(const LimitSolution& sol, const ClusterWeights& cw, std::span<const double> dW0, SdeScheme scheme,
                 PathFields& out);

struct DeviationStrategy {
  enum class Kind { Equilibrium, LimitBestResponse, ZeroControl, ScaledFeedback, CustomAffine };
  Kind kind = Kind::Equilibrium;
  double gamma = 1.0;       // scaled_feedback
  double k0 = 0.0, k1 = 0.0;  // custom_affine: v = k1 x + k0

  static DeviationStrategy equilibrium() { return {}; }
  static DeviationStrategy limit_best_response() { return {Kind::LimitBestResponse}; }
  static DeviationStrategy zero_control() { return {Kind::ZeroControl}; }
  static DeviationStrategy scaled(double gamma) { return {Kind::ScaledFeedback, gamma}; }
  static DeviationStrategy custom_affine(double k0, double k1) { return {Kind::CustomAffine, 1.0, k0, k1}; }

  std::string label() const;
};

/// Gains are bounded so every deviation has finite expected control energy:
/// |gamma| <= kMaxDeviationGain, |k0|, |k1| <= 10 kMaxDeviationGain.
inline constexpr double kMaxDeviationGain = 10.0;

/// Parses "equilibrium", "limit_best_response", "zero_control",
/// "scaled_feedback(<g>)", "custom_affine(<k0>,<k1>)".
DeviationStrategy parse_deviation(const std::string& text);

struct DeviationSpec {
  std::size_t agent = 0;
  DeviationStrategy strategy;
};

/// One population run on one path.
struct PopulationRun {
  std::vector<double> z_o;      // nodes x N
  std::vector<double> cost;     // per agent
  std::vector<double> tracked;  // nodes x tracked agents
  std::vector<double> states;   // nodes x agents, only when requested
};

struct RunRequest {
  std::span<const std::size_t> tracked_agents;
  bool store_states = false;
};

void simulate_closed_loop(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
                          const PathBundle& bundle, PopulationRun& out, RunRequest request = {});

/// Agent dev.agent plays dev.strategy, everyone else the equilibrium feedback.
void simulate_deviation(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
                        const PathBundle& bundle, const DeviationSpec& dev, PopulationRun& out,
                        RunRequest request = {});

struct LimitingRun {
  std::vector<double> y;  // nodes
  double cost = 0.0;
};

/// The limiting system of one agent: same noise, limit fields in place of
/// empirical ones, cost target H (z_bar + eta).
LimitingRun simulate_limiting(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
                              const PathBundle& bundle, std::size_t agent);

/// Trapezoid running cost plus terminal term for one path.
double cost(std::span<const double> x, std::span<const double> u, std::span<const double> nu, const ModelParams& p,
            const TimeGrid& grid);

struct SupEstimate {
  MeanEstimate value;   // at the maximizing (node, index)
  std::size_t node = 0;
  std::size_t index = 0;  // cluster or sampled-agent position
};

struct GapReport {
  SupEstimate z_sq;      // sup_t max_q E|z_o - z_bar|^2
  SupEstimate z_abs_sq;  // sup_t max_q E||z_o|^2 - |z_bar|^2|
  SupEstimate x_sq;      // sup_t max_i E|x_o - y|^2
  SupEstimate x_abs_sq;  // sup_t max_i E||x_o|^2 - |y|^2|
  std::vector<MeanEstimate> cost_gap;  // J_i - J*_i per sampled agent (path-level differences)
  double cost_gap_max = 0.0;           // max_i |mean|
  double cost_gap_max_se = 0.0;
};

struct DeviationResult {
  DeviationSpec spec;
  MeanEstimate cost;       // J_i(v, u^-i)
  MeanEstimate advantage;  // J_i(u, u^-i) - J_i(v, u^-i), CRN differences
};

struct EpsilonReport {
  double eps_hat = 0.0;    // max [mean advantage]_+
  double eps_upper = 0.0;  // max [mean + 1.645 SE]_+
  std::vector<DeviationResult> entries;
};

struct SimOutput {
  std::size_t paths = 0, nodes = 0, cells = 0, agents = 0;
  std::vector<MeanEstimate> agent_cost;      // every agent
  std::vector<std::size_t> sampled;
  std::vector<MeanEstimate> sampled_cost;    // J_i(u)
  std::vector<MeanEstimate> limiting_cost;   // J*_i
  GapReport gaps;
  std::vector<DeviationResult> deviations;
  std::size_t traced = 0;
  std::vector<double> trace_z_o, trace_z_bar;  // traced x nodes x N
  std::vector<double> trace_x, trace_y;        // traced x nodes x sampled
};

/// Monte Carlo over cfg.paths paths in blocks of kPathBlock; blocks run on
/// cfg.threads workers and are reduced in block order, so the output does
/// not depend on the thread count.
SimOutput run_population(const PopulationConfig& cfg, const LimitSolution& sol,
                         const std::vector<DeviationStrategy>& deviations = {});

inline constexpr std::size_t kPathBlock = 32;

GapReport gap_statistics(const SimOutput& out);
EpsilonReport estimate_epsilon(const SimOutput& out);
EpsilonReport estimate_epsilon(const PopulationConfig& cfg, const LimitSolution& sol,
                               const std::vector<DeviationStrategy>& deviations);

void write_fields_csv(const std::filesystem::path& path, const std::string& run_id, const SimOutput& out,
                      const TimeGrid& grid);
void write_costs_csv(const std::filesystem::path& path, const std::string& run_id, const SimOutput& out);

nlohmann::json estimate_to_json(const MeanEstimate& e);
nlohmann::json gaps_to_json(const GapReport& g);
nlohmann::json epsilon_to_json(const EpsilonReport& e);

}  // namespace gmfg
