#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

#include "sprx/checkpoint.hpp"
#include "sprx/dataset.hpp"
#include "sprx/quant.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay Adam:
///   p <- p - lr*wd*p;  m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {}) : config_(config) {}

  /// Applies one update using the accumulated gradients. Parameters without a
  /// gradient buffer are treated as having zero gradient.
  void step(const ParamSet& params) { step(params, config_.lr); }
  /// Same update with an explicit learning rate (for schedules).
  void step(const ParamSet& params, double lr);

  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return config_; }

  void save(std::map<std::string, Tensor>& state) const;
  void load(const std::map<std::string, Tensor>& state, const ParamSet& params, std::size_t steps);

 private:
  AdamWConfig config_;
  std::size_t t_ = 0;
  std::map<std::string, std::vector<real>> m_, v_;
};

struct QatConfig {
  unsigned bits = 8;
  std::size_t refresh = 100;  // steps between scale recalibrations
};

enum class LrSchedule { Constant, Cosine };

std::string_view to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(std::string_view name);

struct TrainConfig {
  GridConfig grid;
  LinkRanges ranges;
  std::vector<std::string> test_profiles{"B", "D"};
  std::size_t batch_size = 16;
  std::size_t steps = 20000;
  AdamWConfig optimizer;
  /// Cosine anneals from optimizer.lr to zero over `steps`.
  LrSchedule lr_schedule = LrSchedule::Constant;
  std::uint64_t seed = 1;
  std::optional<QatConfig> qat;

  /// Throws std::invalid_argument naming the field. Train and test profile
  /// sets must be disjoint.
  void validate() const;

  /// Learning rate of the update that completes step `index + 1`.
  double lr_at(std::size_t index) const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Batch {
  std::vector<SlotSample> slots;
  Tensor input;   // [B, 4, M, N]
  Tensor labels;  // [B, bits, M', N]
};

/// Draws `size` slots from `rng` and assembles tensors.
Batch generate_batch(const GridConfig& grid, const LinkRanges& ranges, std::size_t size, Rng& rng);
Batch make_batch(std::vector<SlotSample> slots, const GridConfig& grid);

struct StepRecord {
  std::size_t step = 0;
  double loss = 0;
  double lr = 0;
  std::optional<double> activation_percent;
};

/// Owns parameters and optimizer state. Batch i is drawn from a generator
/// seeded by (seed, i), so a resumed run sees the same data as an
/// uninterrupted one.
class Trainer {
 public:
  Trainer(ModelConfig model, TrainConfig train);
  /// Starts a fresh optimizer from existing weights (fine-tuning).
  Trainer(ModelConfig model, TrainConfig train, const ParamSet& initial);
  /// Resumes from a checkpoint written by to_checkpoint().
  Trainer(const Checkpoint& ckpt, TrainConfig train);

  /// One optimization step. Throws NumericalError on a non-finite loss
  /// before touching the parameters.
  StepRecord step();
  std::size_t steps_done() const { return optimizer_.steps(); }

  const ModelConfig& model_config() const { return model_; }
  const TrainConfig& train_config() const { return train_; }
  const ParamSet& params() const { return params_; }
  const ScaleMap& scales() const { return scales_; }

  /// Parameters as deployed: fake-quantized with the current scales under QAT,
  /// otherwise a detached copy.
  ParamSet deployed_params() const;

  Checkpoint to_checkpoint() const;

 private:
  void refresh_scales();

  ModelConfig model_;
  TrainConfig train_;
  ParamSet params_;
  AdamW optimizer_;
  ScaleMap scales_;
};

/// Seed stream of the training batches.
inline constexpr std::uint64_t kTrainStream = 0x7472;
/// Seed stream of parameter initialization.
inline constexpr std::uint64_t kInitStream = 0x696e;

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
