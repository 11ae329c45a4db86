#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sprx/evaluate.hpp"
#include "sprx/trainer.hpp"

namespace sprx::cli {

struct GenDataStage {
  std::string name = "dataset";
  std::size_t slots = 100;
  LinkRanges ranges;
};

struct TrainStage {
  ModelConfig model;
  TrainConfig train;
  std::size_t checkpoint_every = 1000;
};

struct EvalStage {
  std::map<std::string, std::string> checkpoints;  // receiver id -> checkpoint path
  std::vector<double> ebno_db{0, 5, 10, 15, 20};
  std::vector<double> doppler_hz{13.3, 133.0, 400.0};
  std::vector<double> delay_ns{100.0};
  std::vector<std::string> profiles{"B", "D"};
  std::size_t slots = 200;
  bool baselines = true;
};

struct QuantizeStage {
  std::string checkpoint;
  unsigned bits = 8;
};

struct EnergyStage {
  std::string checkpoint;
  std::vector<std::size_t> time_steps{2, 10};
  std::vector<unsigned> bits{32, 8};
  std::size_t slots = 64;
  SweepPoint point{10.0, 400.0, 100.0};
  std::vector<std::string> profiles{"B", "D"};
};

struct AblateStage {
  TrainStage base;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::size_t validation_slots = 256;
  std::vector<std::size_t> time_steps{1, 2, 10};
  std::vector<std::size_t> blocks{1, 3, 7};
};

/// A declarative experiment: shared grid and seed plus one section per stage.
/// Parsing is strict; every error names the offending key path.
struct ExperimentSpec {
  std::uint64_t seed = 1;
  GridConfig grid;
  std::optional<GenDataStage> gen_data;
  std::optional<TrainStage> train;
  std::optional<EvalStage> eval;
  std::optional<QuantizeStage> quantize;
  std::optional<EnergyStage> energy;
  std::optional<AblateStage> ablate;
};

/// Raised for malformed or invalid configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

ExperimentSpec parse_experiment(const nlohmann::json& j);
/// Reads a JSON config file. `seed` replaces the file's seed when given.
ExperimentSpec load_experiment(const std::string& path, std::optional<std::uint64_t> seed = std::nullopt);

/// Fully populated canonical form (all defaults explicit, keys sorted).
nlohmann::json to_json(const ExperimentSpec& spec);

nlohmann::json stage_json(const ExperimentSpec& spec, const std::string& stage);

/// 64-bit FNV-1a of the canonical dump, as 16 hex digits.
std::string content_hash(const nlohmann::json& j);

/// Speed to maximum Doppler: f_d = v f_c / c.
double speed_to_doppler(double speed_kmh, double carrier_hz = 4e9);

}  // namespace sprx::cli
