#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gmfg/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Linear-quadratic graphon mean field game solver and epsilon-Nash verifier"};
  app.set_version_flag("--version", "gmfg 1.0");

  std::string command;
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  int threads = 0;
  std::string out;

  app.add_option("command", command, "solve-limit | simulate | deviate | converge")
      ->required()
      ->check(CLI::IsMember({"solve-limit", "simulate", "deviate", "converge"}));
  app.add_option("scenario", scenario, "scenario TOML file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the scenario)");
  auto* paths_opt = app.add_option("--paths", paths, "Monte Carlo paths")->check(CLI::PositiveNumber);
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--out", out, "output directory (default: $GMFG_OUT, then [output].dir, then gmfg_out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    // usage errors count as configuration errors
    return rc == 0 ? 0 : gmfg::kExitConfig;
  }

  gmfg::CommandOptions opts;
  if (*seed_opt) opts.seed = seed;
  if (*paths_opt) opts.paths = paths;
  if (*threads_opt) opts.threads = threads;
  if (*out_opt) opts.out = out;
  return gmfg::run_command(command, scenario, opts, std::cout, std::cerr);
}
