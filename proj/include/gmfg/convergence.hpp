#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "gmfg/graphon.hpp"
#include "gmfg/popsim.hpp"

namespace gmfg {

/// E_N^2 + E_N'^2 + 1 / min_cluster.
double delta_k(double e_n, double e_n_prime, int min_cluster);

struct LadderPoint {
  int nodes = 0;
  int cluster_size = 0;
};

/// Everything a ladder point needs besides (N, |C|).
struct LadderSetup {
  ModelParams params;
  TimeGrid grid{1.0, 1};
  Graphon sampled_from = Graphon::sinusoidal();  // M^[N] is sampled from this kernel
  Graphon limit = Graphon::sinusoidal();         // E_N is measured against this graphon
  SpectralBasis basis;
  MeanProfile mu = MeanProfile::constant(0.0);
  MeanProfile::NodeRule node_rule = MeanProfile::NodeRule::Sample;
  double variance = 0.0;
  std::vector<DeviationStrategy> deviations;
  SdeScheme scheme = SdeScheme::Euler;
  std::uint64_t seed = 0;
  std::size_t paths = 1;
  int threads = 1;
  int quadrature_points = 8;
};

struct LadderRow {
  LadderPoint point;
  double e_n = 0.0, e_n_prime = 0.0, delta = 0.0;
  bool feasible = true;
  std::string reason;
  GapReport gaps;
  EpsilonReport epsilon;
};

struct ConvergenceReport {
  std::vector<LadderRow> rows;
  /// log-log slope of each metric against delta_K; empty when undefined.
  std::vector<std::pair<std::string, std::optional<double>>> slopes;
};

/// Names of the per-row metrics used for slopes and the tidy CSV.
std::vector<std::string> ladder_metrics();
/// Value and standard error of a named metric on a row.
std::pair<double, double> ladder_metric(const LadderRow& row, const std::string& name);

/// Throws ValidationError unless the ladder is nonempty and strictly
/// increasing in both coordinates.
void validate_ladder(const std::vector<LadderPoint>& ladder);

ConvergenceReport run_ladder(const LadderSetup& setup, const std::vector<LadderPoint>& ladder);

nlohmann::json report_to_json(const ConvergenceReport& r);
void write_report_csv(const std::filesystem::path& path, const ConvergenceReport& r);

}  // namespace gmfg
