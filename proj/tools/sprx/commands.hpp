#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sprx::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalFailure = 2 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned threads = 1;
  bool deterministic = false;
  bool resume = false;
  std::vector<std::string> checkpoints;  // "id=path" (eval) or a single path
  std::string axis;                      // ablate
  std::optional<std::size_t> stop_at;    // train: stop after this many steps
};

/// Seed precedence: --seed, then SPRX_SEED, then the config file.
std::optional<std::uint64_t> effective_seed(const Options& opts);

/// Runs one stage ("gen-data", "train", "eval", "quantize", "energy",
/// "ablate"). Progress goes to `log`; artifacts go under
/// <out>/<stage>-<config hash>. Returns an ExitCode.
int run_stage(const std::string& stage, const Options& opts, std::ostream& log);

}  // namespace sprx::cli
