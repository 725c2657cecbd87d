#include "gmfg/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "gmfg/errors.hpp"
#include "toml.hpp"

namespace gmfg {
namespace {

int line_of(const toml::node& n) { return static_cast<int>(n.source().begin.line); }

[[noreturn]] void fail(const std::string& msg, int line) {
  throw ConfigError(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg, line);
}

// Typed access to one TOML table with unknown-key detection.
class Section {
 public:
  Section(const toml::table* table, std::string name, int line) : t_(table), name_(std::move(name)), line_(line) {}

  bool present() const { return t_ != nullptr; }
  bool has(const char* key) const { return t_ != nullptr && t_->contains(key); }
  int line() const { return line_; }

  int line(const char* key) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    return n ? line_of(*n) : line_;
  }

  void only(std::initializer_list<const char*> keys) const {
    if (!t_) return;
    for (auto&& [k, v] : *t_) {
      const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* a) { return k.str() == a; });
      if (!known) fail("unknown key '" + std::string(k.str()) + "' in " + name_, line_of(v));
    }
  }

  double real(const char* key, double fallback) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) return fallback;
    if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) return *v;
    fail(name_ + "." + key + " must be a number", line_of(*n));
  }

  std::int64_t integer(const char* key, std::int64_t fallback) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) return fallback;
    if (!n->is_integer()) fail(name_ + "." + key + " must be an integer", line_of(*n));
    return *n->value<std::int64_t>();
  }

  std::string string(const char* key, const std::string& fallback) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) return fallback;
    if (!n->is_string()) fail(name_ + "." + key + " must be a string", line_of(*n));
    return *n->value<std::string>();
  }

  const toml::array* array(const char* key) const {
    const toml::node* n = t_ ? t_->get(key) : nullptr;
    if (!n) return nullptr;
    if (!n->is_array()) fail(name_ + "." + key + " must be an array", line_of(*n));
    return n->as_array();
  }

  std::vector<double> reals(const char* key) const {
    std::vector<double> out;
    if (const auto* a = array(key)) {
      for (const auto& e : *a) {
        auto v = e.value<double>();
        if (!v || !(e.is_floating_point() || e.is_integer())) fail(name_ + "." + key + " must hold numbers", line_of(e));
        out.push_back(*v);
      }
    }
    return out;
  }

  std::vector<std::int64_t> integers(const char* key) const {
    std::vector<std::int64_t> out;
    if (const auto* a = array(key)) {
      for (const auto& e : *a) {
        if (!e.is_integer()) fail(name_ + "." + key + " must hold integers", line_of(e));
        out.push_back(*e.value<std::int64_t>());
      }
    }
    return out;
  }

  std::vector<std::string> strings(const char* key) const {
    std::vector<std::string> out;
    if (const auto* a = array(key)) {
      for (const auto& e : *a) {
        if (!e.is_string()) fail(name_ + "." + key + " must hold strings", line_of(e));
        out.push_back(*e.value<std::string>());
      }
    }
    return out;
  }

 private:
  const toml::table* t_;
  std::string name_;
  int line_;
};

Section section(const toml::table& root, const char* name) {
  const toml::node* n = root.get(name);
  if (!n) return {nullptr, name, 0};
  if (!n->is_table()) fail("'" + std::string(name) + "' must be a table", line_of(*n));
  return {n->as_table(), name, line_of(*n)};
}

// Runs fn and rethrows library validation errors as config errors at `line`.
template <class F>
auto at_line(int line, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(e.what(), line);
  }
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::filesystem::path& source) {
  toml::table root;
  try {
    root = toml::parse(text, source.string());
  } catch (const toml::parse_error& e) {
    fail(std::string(e.description()), static_cast<int>(e.source().begin.line));
  }

  Scenario s;
  s.source = source;
  const Section top(&root, "scenario", 1);
  top.only({"schema_version", "name", "model", "grid", "graphon", "spectral", "mu", "population", "deviations",
            "ladder", "output"});
  if (!top.has("schema_version")) fail("missing schema_version", 1);
  if (top.integer("schema_version", 0) != kScenarioSchemaVersion) {
    fail("unsupported schema_version (expected " + std::to_string(kScenarioSchemaVersion) + ")",
         top.line("schema_version"));
  }
  s.name = top.string("name", source.stem().string());

  const Section model = section(root, "model");
  model.only({"A", "B", "D", "Sigma", "Sigma0", "Q", "Q_T", "R", "H", "eta", "T"});
  auto& m = s.model;
  m.A = model.real("A", m.A);
  m.B = model.real("B", m.B);
  m.D = model.real("D", m.D);
  m.Sigma = model.real("Sigma", m.Sigma);
  m.Sigma0 = model.real("Sigma0", m.Sigma0);
  m.Q = model.real("Q", m.Q);
  m.QT = model.real("Q_T", m.QT);
  m.R = model.real("R", m.R);
  m.H = model.real("H", m.H);
  m.eta = model.real("eta", m.eta);
  m.T = model.real("T", m.T);
  try {
    m.validate();
  } catch (const ValidationError& e) {
    // point at the offending key when the message names one
    int line = model.line();
    for (const char* key : {"Q_T", "Sigma0", "Sigma", "Q", "R", "T"}) {
      if (std::string(e.what()).find(std::string(key) + " must") != std::string::npos) {
        line = model.line(key);
        break;
      }
    }
    fail(e.what(), line);
  }

  const Section grid = section(root, "grid");
  grid.only({"steps", "scheme"});
  const auto steps = grid.integer("steps", s.steps);
  if (steps < 1 || steps > 10'000'000) fail("grid.steps must be a positive integer", grid.line("steps"));
  s.steps = static_cast<int>(steps);
  s.scheme = at_line(grid.line("scheme"), [&] { return parse_scheme(grid.string("scheme", "euler")); });

  const Section graphon = section(root, "graphon");
  if (!graphon.present()) fail("missing [graphon] table", 0);
  graphon.only({"kernel", "adjacency", "nodes", "quadrature_points"});
  s.kernel = graphon.string("kernel", "");
  const std::string adj = graphon.string("adjacency", "");
  if (s.kernel.empty() == adj.empty()) fail("graphon needs exactly one of 'kernel' or 'adjacency'", graphon.line());
  const auto qp = graphon.integer("quadrature_points", s.quadrature_points);
  if (qp < 4 || qp > 1024) fail("graphon.quadrature_points must lie in [4, 1024]", graphon.line("quadrature_points"));
  s.quadrature_points = static_cast<int>(qp);
  if (!s.kernel.empty()) {
    at_line(graphon.line("kernel"), [&] { return parse_kernel_name(s.kernel); });
    const auto n = graphon.integer("nodes", 0);
    if (n < 1 || n > 100000) fail("graphon.nodes must be a positive integer", graphon.line(graphon.has("nodes") ? "nodes" : "kernel"));
    s.nodes = static_cast<int>(n);
  } else {
    if (graphon.has("nodes")) fail("graphon.nodes is taken from the adjacency file", graphon.line("nodes"));
    std::filesystem::path p(adj);
    if (p.is_relative() && source.has_parent_path()) p = source.parent_path() / p;
    if (!std::filesystem::exists(p)) fail("adjacency file not found: " + p.string(), graphon.line("adjacency"));
    s.adjacency = p;
    s.nodes = at_line(graphon.line("adjacency"), [&] { return static_cast<int>(load_adjacency_csv(p).rows()); });
  }

  const Section spectral = section(root, "spectral");
  spectral.only({"method", "modes"});
  const std::string method = spectral.string("method", s.kernel.empty() ? "numeric" : "analytic");
  if (method == "analytic") s.spectral = Scenario::SpectralMethod::Analytic;
  else if (method == "numeric") s.spectral = Scenario::SpectralMethod::Numeric;
  else if (method == "truncated") s.spectral = Scenario::SpectralMethod::Truncated;
  else fail("spectral.method must be analytic, numeric or truncated", spectral.line("method"));
  const auto modes = spectral.integer("modes", 0);
  if (modes < 0 || modes > 100000) fail("spectral.modes out of range", spectral.line("modes"));
  s.modes = static_cast<int>(modes);
  if (s.spectral != Scenario::SpectralMethod::Analytic && s.modes < 1) {
    fail("spectral.modes is required for the " + method + " method", spectral.line());
  }
  if (s.kernel.empty() && s.spectral != Scenario::SpectralMethod::Numeric) {
    fail("an adjacency-file graphon needs spectral.method = \"numeric\"", spectral.line("method"));
  }
  if (!s.kernel.empty() && s.spectral == Scenario::SpectralMethod::Analytic &&
      parse_kernel_name(s.kernel).kind == AnalyticKernel::Kind::UniformAttachment) {
    fail("uniform_attachment is infinite rank; use spectral.method = \"truncated\" with modes",
         spectral.present() ? spectral.line() : graphon.line("kernel"));
  }
  if (s.spectral == Scenario::SpectralMethod::Numeric && s.modes > s.nodes) {
    fail("spectral.modes exceeds the node count", spectral.line("modes"));
  }

  const Section mu = section(root, "mu");
  mu.only({"profile", "value", "intercept", "slope", "offset", "amplitude", "values", "node_rule"});
  const std::string profile = mu.string("profile", "constant");
  if (profile == "constant") {
    s.mu = MeanProfile::constant(mu.real("value", 0.0));
  } else if (profile == "linear") {
    s.mu = MeanProfile::linear(mu.real("intercept", 0.0), mu.real("slope", 0.0));
  } else if (profile == "cosine") {
    s.mu = MeanProfile::cosine(mu.real("offset", 0.0), mu.real("amplitude", 0.0));
  } else if (profile == "nodes") {
    auto v = mu.reals("values");
    if (static_cast<int>(v.size()) != s.nodes) {
      fail("mu.values needs one entry per node (" + std::to_string(s.nodes) + ")", mu.line("values"));
    }
    s.mu = MeanProfile::node_vector(std::move(v));
  } else {
    fail("mu.profile must be constant, linear, cosine or nodes", mu.line("profile"));
  }
  const std::string rule = mu.string("node_rule", "sample");
  if (rule == "sample") s.node_rule = MeanProfile::NodeRule::Sample;
  else if (rule == "cell_average") s.node_rule = MeanProfile::NodeRule::CellAverage;
  else fail("mu.node_rule must be sample or cell_average", mu.line("node_rule"));

  const Section pop = section(root, "population");
  pop.only({"cluster_size", "cluster_sizes", "variance", "variances", "paths", "seed", "threads", "sampled_agents",
            "trace_paths"});
  if (pop.has("cluster_size") && pop.has("cluster_sizes")) fail("give cluster_size or cluster_sizes, not both", pop.line());
  if (pop.has("cluster_sizes")) {
    for (auto c : pop.integers("cluster_sizes")) {
      if (c < 1 || c > 10'000'000) fail("cluster sizes must be positive", pop.line("cluster_sizes"));
      s.cluster_sizes.push_back(static_cast<int>(c));
    }
    if (static_cast<int>(s.cluster_sizes.size()) != s.nodes) {
      fail("population.cluster_sizes needs one entry per node", pop.line("cluster_sizes"));
    }
  } else {
    const auto c = pop.integer("cluster_size", 10);
    if (c < 1 || c > 10'000'000) fail("population.cluster_size must be positive", pop.line("cluster_size"));
    s.cluster_sizes.assign(static_cast<std::size_t>(s.nodes), static_cast<int>(c));
  }
  if (pop.has("variance") && pop.has("variances")) fail("give variance or variances, not both", pop.line());
  if (pop.has("variances")) {
    s.variances = pop.reals("variances");
    if (static_cast<int>(s.variances.size()) != s.nodes) fail("population.variances needs one entry per node", pop.line("variances"));
  } else {
    s.variances.assign(static_cast<std::size_t>(s.nodes), pop.real("variance", 0.0));
  }
  for (double v : s.variances) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail("initial variances must be finite and >= 0", pop.line(pop.has("variances") ? "variances" : "variance"));
  }
  const auto paths = pop.integer("paths", static_cast<std::int64_t>(s.paths));
  if (paths < 1) fail("population.paths must be >= 1", pop.line("paths"));
  s.paths = static_cast<std::size_t>(paths);
  const auto seed = pop.integer("seed", 0);
  if (seed < 0) fail("population.seed must be >= 0", pop.line("seed"));
  s.seed = static_cast<std::uint64_t>(seed);
  const auto threads = pop.integer("threads", 1);
  if (threads < 1 || threads > 1024) fail("population.threads must lie in [1, 1024]", pop.line("threads"));
  s.threads = static_cast<int>(threads);
  for (auto a : pop.integers("sampled_agents")) {
    if (a < 0) fail("sampled agents must be >= 0", pop.line("sampled_agents"));
    s.sampled_agents.push_back(static_cast<std::size_t>(a));
  }
  const auto trace = pop.integer("trace_paths", static_cast<std::int64_t>(s.trace_paths));
  if (trace < 0) fail("population.trace_paths must be >= 0", pop.line("trace_paths"));
  s.trace_paths = static_cast<std::size_t>(trace);

  const Section dev = section(root, "deviations");
  dev.only({"library"});
  s.deviations = dev.strings("library");
  for (const auto& d : s.deviations) at_line(dev.line("library"), [&] { return parse_deviation(d); });

  const Section ladder = section(root, "ladder");
  ladder.only({"points"});
  if (const auto* pts = ladder.array("points")) {
    for (const auto& e : *pts) {
      const auto* pair = e.as_array();
      if (!pair || pair->size() != 2 || !(*pair)[0].is_integer() || !(*pair)[1].is_integer()) {
        fail("ladder.points entries must be [N, cluster_size] integer pairs", line_of(e));
      }
      s.ladder.push_back({static_cast<int>(*(*pair)[0].value<std::int64_t>()),
                          static_cast<int>(*(*pair)[1].value<std::int64_t>())});
    }
    at_line(ladder.line("points"), [&] { validate_ladder(s.ladder); });
  }

  const Section out = section(root, "output");
  out.only({"dir", "mode_paths"});
  s.out_dir = out.string("dir", "");
  const auto mp = out.integer("mode_paths", 0);
  if (mp < 0) fail("output.mode_paths must be >= 0", out.line("mode_paths"));
  s.mode_paths = static_cast<std::size_t>(mp);

  // Cross-table checks that need the resolved population.
  at_line(pop.line(), [&] {
    PopulationConfig cfg;
    cfg.cluster_sizes = s.cluster_sizes;
    cfg.sampled_agents = s.sampled_agents;
    cfg.mean.assign(s.cluster_sizes.size(), 0.0);
    cfg.variance = s.variances;
    cfg.adjacency = Eigen::MatrixXd::Zero(s.nodes, s.nodes);
    cfg.paths = s.paths;
    cfg.threads = s.threads;
    cfg.validate();
  });
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

nlohmann::json scenario_to_json(const Scenario& s) {
  const auto& m = s.model;
  nlohmann::json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["name"] = s.name;
  j["model"] = {{"A", m.A}, {"B", m.B}, {"D", m.D}, {"Sigma", m.Sigma}, {"Sigma0", m.Sigma0}, {"Q", m.Q},
                {"Q_T", m.QT}, {"R", m.R}, {"H", m.H}, {"eta", m.eta}, {"T", m.T}};
  j["grid"] = {{"steps", s.steps}, {"scheme", scheme_name(s.scheme)}};
  j["graphon"] = {{"nodes", s.nodes}, {"quadrature_points", s.quadrature_points}};
  if (!s.kernel.empty()) j["graphon"]["kernel"] = s.kernel;
  else j["graphon"]["adjacency"] = s.adjacency.filename().string();
  const char* method = s.spectral == Scenario::SpectralMethod::Analytic  ? "analytic"
                       : s.spectral == Scenario::SpectralMethod::Numeric ? "numeric"
                                                                          : "truncated";
  j["spectral"] = {{"method", method}, {"modes", s.modes}};
  j["mu"] = {{"profile", s.mu.describe()},
             {"node_rule", s.node_rule == MeanProfile::NodeRule::Sample ? "sample" : "cell_average"}};
  j["population"] = {{"cluster_sizes", s.cluster_sizes}, {"variances", s.variances},   {"paths", s.paths},
                     {"seed", s.seed},                   {"threads", s.threads},       {"trace_paths", s.trace_paths},
                     {"sampled_agents", s.sampled_agents}};
  j["deviations"] = {{"library", s.deviations}};
  auto& pts = j["ladder"]["points"] = nlohmann::json::array();
  for (const auto& p : s.ladder) pts.push_back({p.nodes, p.cluster_size});
  j["output"] = {{"mode_paths", s.mode_paths}};
  return j;
}

Eigen::MatrixXd scenario_adjacency(const Scenario& s, int nodes) {
  if (!s.kernel.empty()) return sample_from_graphon(Graphon::analytic(parse_kernel_name(s.kernel)), nodes);
  Eigen::MatrixXd m = load_adjacency_csv(s.adjacency);
  if (m.rows() != nodes) throw ValidationError("adjacency file has " + std::to_string(m.rows()) + " nodes");
  return m;
}

SpectralBasis scenario_basis(const Scenario& s, int nodes) {
  switch (s.spectral) {
    case Scenario::SpectralMethod::Analytic:
      return analytic_eigenpairs(parse_kernel_name(s.kernel), s.mu);
    case Scenario::SpectralMethod::Truncated: {
      const AnalyticKernel k = parse_kernel_name(s.kernel);
      SpectralBasis b = analytic_eigenpairs(k, s.mu, s.modes);
      if (static_cast<int>(b.pairs.size()) < s.modes) {
        throw ValidationError("kernel " + k.name() + " has only " + std::to_string(b.pairs.size()) + " modes");
      }
      b.pairs.resize(static_cast<std::size_t>(s.modes));
      return b;
    }
    case Scenario::SpectralMethod::Numeric:
      return numeric_eigenpairs(step_from_matrix(scenario_adjacency(s, nodes)), s.modes, s.mu);
  }
  throw ValidationError("unknown spectral method");
}

Graphon scenario_limit_graphon(const Scenario& s, const SpectralBasis& basis) {
  if (s.spectral == Scenario::SpectralMethod::Analytic) return Graphon::analytic(parse_kernel_name(s.kernel));
  return basis.graphon();
}

PopulationConfig scenario_population(const Scenario& s, int nodes, int cluster_size_override) {
  PopulationConfig cfg;
  cfg.adjacency = scenario_adjacency(s, nodes);
  if (cluster_size_override > 0) {
    cfg.cluster_sizes.assign(static_cast<std::size_t>(nodes), cluster_size_override);
  } else {
    cfg.cluster_sizes = s.cluster_sizes;
  }
  cfg.mean = s.mu.node_means(nodes, s.node_rule);
  if (cluster_size_override > 0 || static_cast<int>(s.variances.size()) != nodes) {
    cfg.variance.assign(static_cast<std::size_t>(nodes), s.variances.empty() ? 0.0 : s.variances.front());
  } else {
    cfg.variance = s.variances;
  }
  cfg.seed = s.seed;
  cfg.paths = s.paths;
  cfg.threads = s.threads;
  cfg.sampled_agents = cluster_size_override > 0 ? std::vector<std::size_t>{} : s.sampled_agents;
  cfg.trace_paths = s.trace_paths;
  cfg.scheme = s.scheme;
  return cfg;
}

std::vector<DeviationStrategy> scenario_deviations(const Scenario& s) {
  std::vector<DeviationStrategy> out;
  for (const auto& d : s.deviations) out.push_back(parse_deviation(d));
  return out;
}

}  // namespace gmfg
