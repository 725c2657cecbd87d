#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace gmfg {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitAssumption = 2,
  kExitNumerical = 3,
};

struct CommandOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<int> threads;
  std::optional<std::filesystem::path> out;  // overrides GMFG_OUT and [output].dir
};

/// Runs one of solve-limit, simulate, deviate, converge and maps failures to
/// exit codes. Progress goes to `log`, errors to `err`.
int run_command(const std::string& command, const std::filesystem::path& scenario, const CommandOptions& options,
                std::ostream& log, std::ostream& err);

/// Output directory: --out, then GMFG_OUT, then [output].dir, then "gmfg_out".
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag,
                                      const std::filesystem::path& scenario_dir);

}  // namespace gmfg
