#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "ftstab/cli_config.hpp"

namespace ftstab {

// Exit codes of the command surface.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;       // a verdict failed
inline constexpr int kExitUndecided = 2;  // solver could not certify either way
inline constexpr int kExitInput = 3;      // config or argument rejected
inline constexpr int kExitInternal = 4;   // library bug or unexpected exception

struct CliOptions {
  std::string command;
  std::string config_path;  // may stay empty for selftest
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;       // overrides mc.seed
  std::optional<std::size_t> runs;         // overrides mc.runs
  std::optional<double> gamma;             // overrides lmi.gamma
  std::optional<std::size_t> depth_cap;    // literal depth of the difference-form criterion
};

// Loads the config (when the command needs one), runs the command, maps every
// error onto an exit code and a machine-readable JSON record on `err`.
int run_cli(const CliOptions& opts, std::ostream& out, std::ostream& err);

// Command dispatch on an already-validated config; throws Error on failure.
int execute(const std::string& command, const Config& cfg, const CliOptions& opts,
            std::ostream& out);

}  // namespace ftstab
