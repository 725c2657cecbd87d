#include "gmfg/popsim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "gmfg/errors.hpp"
#include "gmfg/graphon.hpp"
#include "gmfg/noise.hpp"
#include "gmfg/simd/kernels.hpp"

namespace gmfg {

// ---------------------------------------------------------------------------
// Configuration

std::size_t PopulationConfig::agents() const {
  std::size_t k = 0;
  for (int c : cluster_sizes) k += static_cast<std::size_t>(std::max(c, 0));
  return k;
}

std::vector<std::size_t> PopulationConfig::cluster_starts() const {
  std::vector<std::size_t> s(cluster_sizes.size() + 1, 0);
  for (std::size_t q = 0; q < cluster_sizes.size(); ++q) s[q + 1] = s[q] + static_cast<std::size_t>(cluster_sizes[q]);
  return s;
}

int PopulationConfig::cluster_of(std::size_t agent) const {
  std::size_t acc = 0;
  for (std::size_t q = 0; q < cluster_sizes.size(); ++q) {
    acc += static_cast<std::size_t>(cluster_sizes[q]);
    if (agent < acc) return static_cast<int>(q);
  }
  throw DomainError("agent index " + std::to_string(agent) + " out of range");
}

void PopulationConfig::validate() const {
  const std::size_t n = cluster_sizes.size();
  if (n == 0) throw ValidationError("population: at least one node is required");
  validate_adjacency(adjacency);
  if (static_cast<std::size_t>(adjacency.rows()) != n) {
    throw ValidationError("population: adjacency is " + std::to_string(adjacency.rows()) + "x" +
                          std::to_string(adjacency.cols()) + " but there are " + std::to_string(n) + " clusters");
  }
  for (int c : cluster_sizes) {
    if (c < 1) throw ValidationError("population: every cluster needs at least one agent");
  }
  if (mean.size() != n || variance.size() != n) {
    throw ValidationError("population: need one initial mean and variance per node");
  }
  for (std::size_t q = 0; q < n; ++q) {
    if (!std::isfinite(mean[q])) throw ValidationError("population: initial means must be finite");
    if (!(variance[q] >= 0.0) || !std::isfinite(variance[q])) {
      throw ValidationError("population: initial variances must be finite and >= 0");
    }
  }
  if (paths < 1) throw ValidationError("population: paths must be >= 1");
  if (threads < 1) throw ValidationError("population: threads must be >= 1");
  const std::size_t k = agents();
  std::set<int> covered;
  for (std::size_t a : sampled_agents) {
    if (a >= k) throw ValidationError("population: sampled agent " + std::to_string(a) + " out of range");
    covered.insert(cluster_sizes[static_cast<std::size_t>(cluster_of(a))]);
  }
  if (!sampled_agents.empty()) {
    for (int c : cluster_sizes) {
      if (!covered.count(c)) {
        throw ValidationError("population: sampled agents must cover every distinct cluster size (missing " +
                              std::to_string(c) + ")");
      }
    }
  }
}

std::vector<std::size_t> default_sampled_agents(const PopulationConfig& cfg) {
  if (!cfg.sampled_agents.empty()) return cfg.sampled_agents;
  const auto starts = cfg.cluster_starts();
  const std::size_t n = cfg.cluster_sizes.size();
  std::vector<std::size_t> out{starts[0]};
  std::set<int> covered{cfg.cluster_sizes[0]};
  if (n > 1) {
    out.push_back(starts[n / 2]);
    covered.insert(cfg.cluster_sizes[n / 2]);
  }
  for (std::size_t q = 0; q < n; ++q) {
    if (!covered.count(cfg.cluster_sizes[q])) {
      out.push_back(starts[q]);
      covered.insert(cfg.cluster_sizes[q]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Noise and limit fields

void fill_bundle(const PopulationConfig& cfg, const TimeGrid& grid, std::size_t path, PathBundle& out) {
  const std::size_t k = cfg.agents();
  const std::size_t steps = static_cast<std::size_t>(grid.steps());
  out.path = path;
  out.agents = k;
  out.steps = steps;
  out.dW0.resize(steps);
  out.dw.resize(steps * k);
  out.x0.resize(k);
  common_increments(cfg.seed, path, grid.dt(), out.dW0);
  const double scale = std::sqrt(grid.dt());
  const auto starts = cfg.cluster_starts();
  for (std::size_t q = 0; q < cfg.cluster_sizes.size(); ++q) {
    const double sd = std::sqrt(cfg.variance[q]);
    for (std::size_t i = starts[q]; i < starts[q + 1]; ++i) {
      NormalStream s(stream_key(cfg.seed, path, StreamTag::Agent, i));
      out.x0[i] = cfg.mean[q] + sd * s.next();
      for (std::size_t n = 0; n < steps; ++n) out.dw[n * k + i] = scale * s.next();
    }
  }
}

void fill_fields(const LimitSolution& sol, const ClusterWeights& cw, std::span<const double> dW0, SdeScheme scheme,
                 PathFields& out) {
  const std::size_t nodes = sol.grid.nodes();
  const std::size_t d = sol.d();
  const std::size_t n_cells = static_cast<std::size_t>(cw.cells);
  out.z.resize(nodes * d);
  out.g.resize(nodes * d);
  out.z_bar.resize(nodes * n_cells);
  out.g_bar.resize(nodes * n_cells);
  simulate_mode_path(sol, dW0, scheme, out.z, out.g);
  strategy_fields(sol, cw, out.z, out.g, out.z_bar, out.g_bar);
}

// ---------------------------------------------------------------------------
// Deviation strategies

std::string DeviationStrategy::label() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::Equilibrium:
      return "equilibrium";
    case Kind::LimitBestResponse:
      return "limit_best_response";
    case Kind::ZeroControl:
      return "zero_control";
    case Kind::ScaledFeedback:
      os << "scaled_feedback(" << gamma << ")";
      return os.str();
    case Kind::CustomAffine:
      os << "custom_affine(" << k0 << "," << k1 << ")";
      return os.str();
  }
  return "unknown";
}

namespace {

std::vector<double> parse_args(const std::string& text, const std::string& head, std::size_t count) {
  if (text.size() < head.size() + 2 || text.compare(0, head.size() + 1, head + "(") != 0 || text.back() != ')') {
    return {};
  }
  std::vector<double> out;
  std::stringstream ss(text.substr(head.size() + 1, text.size() - head.size() - 2));
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ValidationError("bad number in deviation '" + text + "'");
    }
    while (used < item.size() && item[used] == ' ') ++used;
    if (used != item.size()) throw ValidationError("bad number in deviation '" + text + "'");
    out.push_back(v);
  }
  if (out.size() != count) throw ValidationError("deviation '" + text + "' takes " + std::to_string(count) + " argument(s)");
  return out;
}

}  // namespace

DeviationStrategy parse_deviation(const std::string& text) {
  if (text == "equilibrium") return DeviationStrategy::equilibrium();
  if (text == "limit_best_response") return DeviationStrategy::limit_best_response();
  if (text == "zero_control") return DeviationStrategy::zero_control();
  if (auto a = parse_args(text, "scaled_feedback", 1); !a.empty()) {
    if (!(std::fabs(a[0]) <= kMaxDeviationGain)) {
      throw ValidationError("scaled_feedback factor must lie in [-10, 10]");
    }
    return DeviationStrategy::scaled(a[0]);
  }
  if (auto a = parse_args(text, "custom_affine", 2); !a.empty()) {
    if (!(std::fabs(a[0]) <= 10.0 * kMaxDeviationGain) || !(std::fabs(a[1]) <= 10.0 * kMaxDeviationGain)) {
      throw ValidationError("custom_affine gains must lie in [-100, 100]");
    }
    return DeviationStrategy::custom_affine(a[0], a[1]);
  }
  throw ValidationError("unknown deviation '" + text + "'");
}

// ---------------------------------------------------------------------------
// Path simulation

namespace {

struct AffineStep {
  double mult, add, sigma;
};

// One step of x' = (A + B k1) x + B k0 + D z with noise Sigma dw + Sigma0 dW0,
// written as x' = (mult x + add) + sigma dw for the vector kernel.
AffineStep step_coeffs(const ModelParams& p, SdeScheme scheme, double dt, double k1a, double k1b, double k0a,
                       double k0b, double z, double dW0) {
  if (scheme == SdeScheme::Euler) {
    return {1.0 + (p.A + p.B * k1a) * dt, (p.B * k0a + p.D * z) * dt + p.Sigma0 * dW0, p.Sigma};
  }
  const double a = p.A + p.B * (0.5 * (k1a + k1b));
  const double off = p.B * (0.5 * (k0a + k0b)) + p.D * z;
  const double s = std::sqrt(expm1_over_x(2.0 * a * dt));
  return {std::exp(a * dt), dt * expm1_over_x(a * dt) * off + p.Sigma0 * s * dW0, p.Sigma * s};
}

double feedback(double scale, double v) { return -(scale * v); }

double trapezoid_weight(std::size_t n, std::size_t last, double dt) { return (n == 0 || n == last) ? 0.5 * dt : dt; }

struct Override {
  std::size_t agent;
  int cluster;
  std::vector<double> k1, k0;  // per node
};

void check_sizes(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
                 const PathBundle& bundle) {
  const std::size_t nodes = sol.grid.nodes();
  const std::size_t n = cfg.cluster_sizes.size();
  if (bundle.steps + 1 != nodes || bundle.agents != cfg.agents()) {
    throw ValidationError("path bundle does not match the time grid or population");
  }
  if (fields.g_bar.size() != nodes * n || fields.z_bar.size() != nodes * n) {
    throw ValidationError("limit fields do not match the time grid or node count");
  }
}

void run_core(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
              const PathBundle& bundle, const Override* dev, PopulationRun& out, RunRequest request) {
  check_sizes(cfg, sol, fields, bundle);
  const auto& p = sol.params;
  const auto& kt = simd::active_kernels();
  const std::size_t K = cfg.agents();
  const std::size_t N = cfg.cluster_sizes.size();
  const std::size_t nodes = sol.grid.nodes();
  const std::size_t last = nodes - 1;
  const double dt = sol.grid.dt();
  const double scale = p.B / (2.0 * p.R);
  const auto starts = cfg.cluster_starts();
  const Eigen::MatrixXd w = cfg.adjacency / static_cast<double>(N);

  std::vector<double> x = bundle.x0;
  std::vector<double> means(N);
  out.z_o.resize(nodes * N);
  out.cost.assign(K, 0.0);
  const std::size_t tracked = request.tracked_agents.size();
  out.tracked.resize(nodes * tracked);
  if (request.store_states) out.states.resize(nodes * K);
  else out.states.clear();

  // Calls fn(lo, hi) on the cluster's agents, skipping the deviating agent.
  const auto segments = [&](std::size_t q, auto&& fn) {
    const std::size_t lo = starts[q], hi = starts[q + 1];
    if (dev != nullptr && dev->cluster == static_cast<int>(q)) {
      if (dev->agent > lo) fn(lo, dev->agent);
      if (dev->agent + 1 < hi) fn(dev->agent + 1, hi);
    } else {
      fn(lo, hi);
    }
  };

  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t q = 0; q < N; ++q) {
      means[q] = kt.sum(x.data() + starts[q], starts[q + 1] - starts[q]) / static_cast<double>(cfg.cluster_sizes[q]);
      if (!std::isfinite(means[q])) {
        throw NumericalError("population state is not finite at step " + std::to_string(n));
      }
    }
    double* zo = out.z_o.data() + n * N;
    for (std::size_t q = 0; q < N; ++q) {
      double s = 0.0;
      for (std::size_t l = 0; l < N; ++l) s += w(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(l)) * means[l];
      zo[q] = s;
    }
    if (request.store_states) std::copy(x.begin(), x.end(), out.states.begin() + static_cast<std::ptrdiff_t>(n * K));
    for (std::size_t s = 0; s < tracked; ++s) out.tracked[n * tracked + s] = x[request.tracked_agents[s]];

    const double wn = trapezoid_weight(n, last, dt);
    const double wq = p.Q * wn + (n == last ? p.QT : 0.0);
    const double wr = p.R * wn;
    const double k1 = feedback(scale, sol.f[n]);
    const double* gb = fields.g_bar.data() + n * N;
    for (std::size_t q = 0; q < N; ++q) {
      const double k0 = feedback(scale, gb[q]);
      const double target = p.H * (zo[q] + p.eta);
      segments(q, [&](std::size_t lo, std::size_t hi) {
        kt.quadratic_cost(out.cost.data() + lo, x.data() + lo, hi - lo, target, k1, k0, wq, wr);
      });
      if (dev != nullptr && dev->cluster == static_cast<int>(q)) {
        kt.quadratic_cost(out.cost.data() + dev->agent, x.data() + dev->agent, 1, target, dev->k1[n], dev->k0[n], wq,
                          wr);
      }
    }
    if (n == last) break;

    const double k1n = feedback(scale, sol.f[n + 1]);
    const double* gbn = fields.g_bar.data() + (n + 1) * N;
    const double* noise = bundle.dw.data() + n * K;
    for (std::size_t q = 0; q < N; ++q) {
      const double k0 = feedback(scale, gb[q]);
      const double k0n = feedback(scale, gbn[q]);
      const AffineStep st = step_coeffs(p, cfg.scheme, dt, k1, k1n, k0, k0n, zo[q], bundle.dW0[n]);
      segments(q, [&](std::size_t lo, std::size_t hi) {
        kt.affine_update(x.data() + lo, hi - lo, st.mult, st.add, st.sigma, noise + lo);
      });
      if (dev != nullptr && dev->cluster == static_cast<int>(q)) {
        const AffineStep ds =
            step_coeffs(p, cfg.scheme, dt, dev->k1[n], dev->k1[n + 1], dev->k0[n], dev->k0[n + 1], zo[q], bundle.dW0[n]);
        kt.affine_update(x.data() + dev->agent, 1, ds.mult, ds.add, ds.sigma, noise + dev->agent);
      }
    }
  }
}

}  // namespace

void simulate_closed_loop(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
                          const PathBundle& bundle, PopulationRun& out, RunRequest request) {
  run_core(cfg, sol, fields, bundle, nullptr, out, request);
}

void simulate_deviation(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
                        const PathBundle& bundle, const DeviationSpec& dev, PopulationRun& out, RunRequest request) {
  if (dev.agent >= cfg.agents()) throw ValidationError("deviating agent out of range");
  check_sizes(cfg, sol, fields, bundle);
  const auto& p = sol.params;
  const std::size_t nodes = sol.grid.nodes();
  const std::size_t N = cfg.cluster_sizes.size();
  const double scale = p.B / (2.0 * p.R);
  Override o;
  o.agent = dev.agent;
  o.cluster = cfg.cluster_of(dev.agent);
  o.k1.resize(nodes);
  o.k0.resize(nodes);
  const auto& s = dev.strategy;
  for (std::size_t n = 0; n < nodes; ++n) {
    const double k1 = feedback(scale, sol.f[n]);
    const double k0 = feedback(scale, fields.g_bar[n * N + static_cast<std::size_t>(o.cluster)]);
    switch (s.kind) {
      case DeviationStrategy::Kind::Equilibrium:
      case DeviationStrategy::Kind::LimitBestResponse:
        o.k1[n] = k1;
        o.k0[n] = k0;
        break;
      case DeviationStrategy::Kind::ZeroControl:
        o.k1[n] = 0.0;
        o.k0[n] = 0.0;
        break;
      case DeviationStrategy::Kind::ScaledFeedback:
        o.k1[n] = s.gamma * k1;
        o.k0[n] = s.gamma * k0;
        break;
      case DeviationStrategy::Kind::CustomAffine:
        o.k1[n] = s.k1;
        o.k0[n] = s.k0;
        break;
    }
  }
  run_core(cfg, sol, fields, bundle, &o, out, request);
}

LimitingRun simulate_limiting(const PopulationConfig& cfg, const LimitSolution& sol, const PathFields& fields,
                              const PathBundle& bundle, std::size_t agent) {
  check_sizes(cfg, sol, fields, bundle);
  const auto& p = sol.params;
  const auto& kt = simd::active_kernels();
  const std::size_t K = cfg.agents();
  const std::size_t N = cfg.cluster_sizes.size();
  const std::size_t q = static_cast<std::size_t>(cfg.cluster_of(agent));
  const std::size_t nodes = sol.grid.nodes();
  const std::size_t last = nodes - 1;
  const double dt = sol.grid.dt();
  const double scale = p.B / (2.0 * p.R);

  LimitingRun r;
  r.y.resize(nodes);
  double y = bundle.x0[agent];
  for (std::size_t n = 0; n < nodes; ++n) {
    r.y[n] = y;
    const double zb = fields.z_bar[n * N + q];
    const double wn = trapezoid_weight(n, last, dt);
    const double k1 = feedback(scale, sol.f[n]);
    const double k0 = feedback(scale, fields.g_bar[n * N + q]);
    kt.quadratic_cost(&r.cost, &y, 1, p.H * (zb + p.eta), k1, k0, p.Q * wn + (n == last ? p.QT : 0.0), p.R * wn);
    if (n == last) break;
    const AffineStep st = step_coeffs(p, cfg.scheme, dt, k1, feedback(scale, sol.f[n + 1]), k0,
                                      feedback(scale, fields.g_bar[(n + 1) * N + q]), zb, bundle.dW0[n]);
    kt.affine_update(&y, 1, st.mult, st.add, st.sigma, bundle.dw.data() + n * K + agent);
  }
  return r;
}

double cost(std::span<const double> x, std::span<const double> u, std::span<const double> nu, const ModelParams& p,
            const TimeGrid& grid) {
  const std::size_t nodes = grid.nodes();
  if (x.size() != nodes || u.size() != nodes || nu.size() != nodes) {
    throw ValidationError("cost: trajectories must have one value per grid node");
  }
  const double dt = grid.dt();
  double running = 0.0;
  for (std::size_t n = 0; n < nodes; ++n) {
    const double e = x[n] - nu[n];
    running += trapezoid_weight(n, nodes - 1, dt) * (p.Q * e * e + p.R * u[n] * u[n]);
  }
  const double e = x[nodes - 1] - nu[nodes - 1];
  return running + p.QT * e * e;
}

// ---------------------------------------------------------------------------
// Monte Carlo engine

namespace {

struct BlockResult {
  std::vector<MomentAccumulator> agent_cost, sampled_cost, limiting_cost, cost_gap;
  std::vector<MomentAccumulator> z_sq, z_abs, x_sq, x_abs;
  std::vector<MomentAccumulator> dev_cost, dev_adv;
  std::size_t traced = 0;
  std::vector<double> trace_z_o, trace_z_bar, trace_x, trace_y;
  std::exception_ptr error;

  void init(std::size_t K, std::size_t S, std::size_t nodes, std::size_t N, std::size_t V) {
    agent_cost.assign(K, {});
    sampled_cost.assign(S, {});
    limiting_cost.assign(S, {});
    cost_gap.assign(S, {});
    z_sq.assign(nodes * N, {});
    z_abs.assign(nodes * N, {});
    x_sq.assign(nodes * S, {});
    x_abs.assign(nodes * S, {});
    dev_cost.assign(S * V, {});
    dev_adv.assign(S * V, {});
  }
};

void merge_into(std::vector<MomentAccumulator>& a, const std::vector<MomentAccumulator>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i].merge(b[i]);
}

SupEstimate sup_of(const std::vector<MomentAccumulator>& acc, std::size_t width) {
  SupEstimate s;
  bool first = true;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    const auto e = acc[k].estimate();
    if (first || e.mean > s.value.mean) {
      s.value = e;
      s.node = k / width;
      s.index = k % width;
      first = false;
    }
  }
  return s;
}

std::vector<MeanEstimate> estimates(const std::vector<MomentAccumulator>& acc) {
  std::vector<MeanEstimate> out;
  out.reserve(acc.size());
  for (const auto& a : acc) out.push_back(a.estimate());
  return out;
}

}  // namespace

SimOutput run_population(const PopulationConfig& cfg, const LimitSolution& sol,
                         const std::vector<DeviationStrategy>& deviations) {
  cfg.validate();
  const std::size_t K = cfg.agents();
  const std::size_t N = cfg.cluster_sizes.size();
  const std::size_t nodes = sol.grid.nodes();
  const std::vector<std::size_t> sampled = default_sampled_agents(cfg);
  const std::size_t S = sampled.size();
  const std::size_t V = deviations.size();
  const ClusterWeights cw = cluster_weights(sol.basis, static_cast<int>(N));
  const std::size_t blocks = (cfg.paths + kPathBlock - 1) / kPathBlock;
  std::vector<BlockResult> results(blocks);
  std::atomic<std::size_t> next{0};

  const auto worker = [&]() {
    PathBundle bundle;
    PathFields fields;
    PopulationRun run, devrun;
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks) return;
      BlockResult& r = results[b];
      try {
        r.init(K, S, nodes, N, V);
        const std::size_t first = b * kPathBlock;
        const std::size_t stop = std::min(cfg.paths, first + kPathBlock);
        for (std::size_t path = first; path < stop; ++path) {
          fill_bundle(cfg, sol.grid, path, bundle);
          fill_fields(sol, cw, bundle.dW0, cfg.scheme, fields);
          simulate_closed_loop(cfg, sol, fields, bundle, run, {sampled, false});
          for (std::size_t k = 0; k < K; ++k) r.agent_cost[k].add(run.cost[k]);
          for (std::size_t n = 0; n < nodes; ++n) {
            for (std::size_t q = 0; q < N; ++q) {
              const double zo = run.z_o[n * N + q], zb = fields.z_bar[n * N + q];
              r.z_sq[n * N + q].add((zo - zb) * (zo - zb));
              r.z_abs[n * N + q].add(std::fabs(zo * zo - zb * zb));
            }
          }
          const bool trace = path < cfg.trace_paths;
          if (trace) {
            ++r.traced;
            r.trace_z_o.insert(r.trace_z_o.end(), run.z_o.begin(), run.z_o.end());
            r.trace_z_bar.insert(r.trace_z_bar.end(), fields.z_bar.begin(), fields.z_bar.end());
            r.trace_x.insert(r.trace_x.end(), run.tracked.begin(), run.tracked.end());
          }
          std::vector<double> ys(trace ? nodes * S : 0);
          for (std::size_t s = 0; s < S; ++s) {
            const std::size_t i = sampled[s];
            const LimitingRun lim = simulate_limiting(cfg, sol, fields, bundle, i);
            r.sampled_cost[s].add(run.cost[i]);
            r.limiting_cost[s].add(lim.cost);
            r.cost_gap[s].add(run.cost[i] - lim.cost);
            for (std::size_t n = 0; n < nodes; ++n) {
              const double x = run.tracked[n * S + s], y = lim.y[n];
              r.x_sq[n * S + s].add((x - y) * (x - y));
              r.x_abs[n * S + s].add(std::fabs(x * x - y * y));
              if (trace) ys[n * S + s] = y;
            }
            for (std::size_t v = 0; v < V; ++v) {
              simulate_deviation(cfg, sol, fields, bundle, {i, deviations[v]}, devrun);
              r.dev_cost[s * V + v].add(devrun.cost[i]);
              r.dev_adv[s * V + v].add(run.cost[i] - devrun.cost[i]);
            }
          }
          if (trace) r.trace_y.insert(r.trace_y.end(), ys.begin(), ys.end());
        }
      } catch (...) {
        r.error = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), blocks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BlockResult total;
  total.init(K, S, nodes, N, V);
  for (const auto& r : results) {
    if (r.error) std::rethrow_exception(r.error);
    merge_into(total.agent_cost, r.agent_cost);
    merge_into(total.sampled_cost, r.sampled_cost);
    merge_into(total.limiting_cost, r.limiting_cost);
    merge_into(total.cost_gap, r.cost_gap);
    merge_into(total.z_sq, r.z_sq);
    merge_into(total.z_abs, r.z_abs);
    merge_into(total.x_sq, r.x_sq);
    merge_into(total.x_abs, r.x_abs);
    merge_into(total.dev_cost, r.dev_cost);
    merge_into(total.dev_adv, r.dev_adv);
    total.traced += r.traced;
    total.trace_z_o.insert(total.trace_z_o.end(), r.trace_z_o.begin(), r.trace_z_o.end());
    total.trace_z_bar.insert(total.trace_z_bar.end(), r.trace_z_bar.begin(), r.trace_z_bar.end());
    total.trace_x.insert(total.trace_x.end(), r.trace_x.begin(), r.trace_x.end());
    total.trace_y.insert(total.trace_y.end(), r.trace_y.begin(), r.trace_y.end());
  }

  SimOutput out;
  out.paths = cfg.paths;
  out.nodes = nodes;
  out.cells = N;
  out.agents = K;
  out.sampled = sampled;
  out.agent_cost = estimates(total.agent_cost);
  out.sampled_cost = estimates(total.sampled_cost);
  out.limiting_cost = estimates(total.limiting_cost);
  out.gaps.z_sq = sup_of(total.z_sq, N);
  out.gaps.z_abs_sq = sup_of(total.z_abs, N);
  out.gaps.x_sq = sup_of(total.x_sq, S);
  out.gaps.x_abs_sq = sup_of(total.x_abs, S);
  out.gaps.cost_gap = estimates(total.cost_gap);
  for (const auto& e : out.gaps.cost_gap) {
    if (std::fabs(e.mean) >= out.gaps.cost_gap_max) {
      out.gaps.cost_gap_max = std::fabs(e.mean);
      out.gaps.cost_gap_max_se = e.std_error;
    }
  }
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t v = 0; v < V; ++v) {
      out.deviations.push_back({{sampled[s], deviations[v]},
                                total.dev_cost[s * V + v].estimate(),
                                total.dev_adv[s * V + v].estimate()});
    }
  }
  out.traced = total.traced;
  out.trace_z_o = std::move(total.trace_z_o);
  out.trace_z_bar = std::move(total.trace_z_bar);
  out.trace_x = std::move(total.trace_x);
  out.trace_y = std::move(total.trace_y);
  return out;
}

GapReport gap_statistics(const SimOutput& out) { return out.gaps; }

EpsilonReport estimate_epsilon(const SimOutput& out) {
  EpsilonReport r;
  r.entries = out.deviations;
  for (const auto& e : r.entries) {
    r.eps_hat = std::max(r.eps_hat, e.advantage.mean);
    r.eps_upper = std::max(r.eps_upper, e.advantage.mean + 1.645 * e.advantage.std_error);
  }
  return r;
}

EpsilonReport estimate_epsilon(const PopulationConfig& cfg, const LimitSolution& sol,
                               const std::vector<DeviationStrategy>& deviations) {
  if (deviations.empty()) throw ValidationError("deviation library is empty");
  return estimate_epsilon(run_population(cfg, sol, deviations));
}

// ---------------------------------------------------------------------------
// Output

void write_fields_csv(const std::filesystem::path& path, const std::string& run_id, const SimOutput& out,
                      const TimeGrid& grid) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << "# schema_version=1\n";
  f << "run_id,path,node,t,z_oq,z_bar_q\n";
  char buf[192];
  for (std::size_t p = 0; p < out.traced; ++p) {
    for (std::size_t n = 0; n < out.nodes; ++n) {
      for (std::size_t q = 0; q < out.cells; ++q) {
        const std::size_t k = (p * out.nodes + n) * out.cells + q;
        std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.17g,%.17g,%.17g\n", run_id.c_str(), p, q + 1, grid.t(n),
                      out.trace_z_o[k], out.trace_z_bar[k]);
        f << buf;
      }
    }
  }
}

void write_costs_csv(const std::filesystem::path& path, const std::string& run_id, const SimOutput& out) {
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path.string());
  f << "# schema_version=1\n";
  f << "run_id,agent,J_hat,stderr\n";
  char buf[160];
  for (std::size_t i = 0; i < out.agent_cost.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g\n", run_id.c_str(), i, out.agent_cost[i].mean,
                  out.agent_cost[i].std_error);
    f << buf;
  }
}

nlohmann::json estimate_to_json(const MeanEstimate& e) {
  return {{"mean", e.mean}, {"stderr", e.std_error}, {"n", e.count}};
}

namespace {

nlohmann::json sup_to_json(const SupEstimate& s, const char* index_name) {
  return {{"mean", s.value.mean}, {"stderr", s.value.std_error}, {"node", s.node}, {index_name, s.index}};
}

}  // namespace

nlohmann::json gaps_to_json(const GapReport& g) {
  nlohmann::json j;
  j["z_sq"] = sup_to_json(g.z_sq, "cluster");
  j["z_abs_sq"] = sup_to_json(g.z_abs_sq, "cluster");
  j["x_sq"] = sup_to_json(g.x_sq, "sampled");
  j["x_abs_sq"] = sup_to_json(g.x_abs_sq, "sampled");
  auto& c = j["cost_gap"] = nlohmann::json::array();
  for (const auto& e : g.cost_gap) c.push_back(estimate_to_json(e));
  j["cost_gap_max"] = g.cost_gap_max;
  j["cost_gap_max_stderr"] = g.cost_gap_max_se;
  return j;
}

nlohmann::json epsilon_to_json(const EpsilonReport& e) {
  nlohmann::json j;
  j["eps_hat"] = e.eps_hat;
  j["eps_upper_95"] = e.eps_upper;
  auto& arr = j["entries"] = nlohmann::json::array();
  for (const auto& d : e.entries) {
    arr.push_back({{"agent", d.spec.agent},
                   {"deviation", d.spec.strategy.label()},
                   {"J_deviation", estimate_to_json(d.cost)},
                   {"advantage", estimate_to_json(d.advantage)}});
  }
  return j;
}

}  // namespace gmfg
