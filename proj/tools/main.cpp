#include <malloc.h>

#include <iostream>

#include <CLI11.hpp>

#include "sprx/commands.hpp"

int main(int argc, char** argv) {
  // Training allocates and frees large activation buffers every step; keeping
  // them out of mmap avoids page-fault churn.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"sprx: spiking and convolutional OFDM receivers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sprx 0.1.0");

  sprx::cli::Options opts;
  std::uint64_t seed = 0;
  std::size_t stop_at = 0;

  const char* stages[][2] = {
      {"gen-data", "Generate a dataset of link-level slots"},
      {"train", "Train a receiver"},
      {"eval", "Sweep BER/BCE for trained receivers and baselines"},
      {"quantize", "Quantize a trained checkpoint"},
      {"energy", "Estimate inference energy from spike statistics"},
      {"ablate", "Train and compare variants along one axis"},
  };
  for (const auto& [name, help] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config, "Experiment JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Master seed (overrides SPRX_SEED and the config)");
    sub->add_option("--out", opts.out, "Output root directory")->capture_default_str();
    sub->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--deterministic", opts.deterministic, "Force single-threaded execution");
    const std::string stage = name;
    if (stage == "train") {
      sub->add_flag("--resume", opts.resume, "Continue from the checkpoint in the output directory");
      sub->add_option("--stop-at", stop_at, "Stop after this many total steps")->check(CLI::PositiveNumber);
    }
    if (stage == "eval")
      sub->add_option("--checkpoint", opts.checkpoints, "Receiver as id=path (repeatable)");
    if (stage == "quantize" || stage == "energy")
      sub->add_option("--checkpoint", opts.checkpoints, "Checkpoint path")->expected(1);
    if (stage == "ablate")
      sub->add_option("--axis", opts.axis, "time-steps, combine-op, surrogate or blocks")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : sprx::cli::kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) opts.seed = seed;
  if (sub->get_option_no_throw("--stop-at") && sub->count("--stop-at")) opts.stop_at = stop_at;
  return sprx::cli::run_stage(sub->get_name(), opts, std::cerr);
}
