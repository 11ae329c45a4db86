#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sprx/dataset.hpp"
#include "sprx/model.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

struct SweepPoint {
  double ebno_db = 10.0;
  double doppler_hz = 0.0;
  double delay_ns = 100.0;
};

/// A trained network taking part in an evaluation.
struct ModelReceiver {
  std::string id;
  ModelConfig config;
  ParamSet params;
};

struct ReceiverMetrics {
  std::string receiver;
  double ber = 0;
  double bce = 0;
  std::size_t slots = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t bits = 0;
  SpikeTrace trace;  // spiking receivers only
};

/// Accumulates hard-decision errors and BCE of per-bit probabilities.
/// BCE is summed in fixed point, so the result does not depend on the order
/// in which slots are added.
class MetricAccumulator {
 public:
  /// probs and bits in payload order.
  void add(std::span<const double> probs, std::span<const std::uint8_t> bits, std::size_t slots);
  ReceiverMetrics result(std::string receiver) const;

 private:
  std::uint64_t errors_ = 0, bits_ = 0;
  std::size_t slots_ = 0;
  __extension__ __int128 bce_fixed_ = 0;
};

inline const std::vector<std::string> kBaselineReceivers{"ls", "genie"};

/// Runs every receiver over the same slots. Baselines are included when
/// `baselines` is set. Model inference runs in chunks of `chunk` slots.
std::vector<ReceiverMetrics> evaluate_slots(const std::vector<SlotSample>& slots, const GridConfig& grid,
                                            const std::vector<ModelReceiver>& models, bool baselines = true,
                                            std::size_t chunk = 32);

/// Draws `count` slots at one sweep point (slot i uses a generator seeded by
/// (seed, i); the profile cycles through `profiles`) and evaluates them.
std::vector<SlotSample> draw_sweep_slots(const GridConfig& grid, const std::vector<std::string>& profiles,
                                         const SweepPoint& point, std::size_t count, std::uint64_t seed);

/// Network output [B, bits, M', N] reordered to payload order per slot.
std::vector<double> probs_in_payload_order(const Tensor& probs, std::size_t slot);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
