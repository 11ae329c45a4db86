#include "sprx/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "sprx/baseline.hpp"
#include "sprx/ops.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

namespace {

constexpr double kFixedScale = 1099511627776.0;  // 2^40

double clamp_prob(double p) {
  return std::clamp(p, static_cast<double>(kProbClamp), 1.0 - static_cast<double>(kProbClamp));
}

}  // namespace

void MetricAccumulator::add(std::span<const double> probs, std::span<const std::uint8_t> bits, std::size_t slots) {
  if (probs.size() != bits.size()) throw std::invalid_argument("metric: probability and bit counts differ");
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = clamp_prob(probs[i]);
    const double loss = bits[i] ? -std::log(p) : -std::log1p(-p);
    bce_fixed_ += std::llround(loss * kFixedScale);
    const std::uint8_t hard = probs[i] > 0.5 ? 1 : 0;
    errors_ += hard != bits[i];
  }
  bits_ += bits.size();
  slots_ += slots;
}

ReceiverMetrics MetricAccumulator::result(std::string receiver) const {
  ReceiverMetrics m;
  m.receiver = std::move(receiver);
  m.slots = slots_;
  m.bits = bits_;
  m.bit_errors = errors_;
  if (bits_ > 0) {
    m.ber = static_cast<double>(errors_) / static_cast<double>(bits_);
    m.bce = static_cast<double>(bce_fixed_) / kFixedScale / static_cast<double>(bits_);
  }
  return m;
}

std::vector<double> probs_in_payload_order(const Tensor& probs, std::size_t slot) {
  const std::size_t bt = probs.extent(1), rows = probs.extent(2), cols = probs.extent(3);
  const auto d = probs.data().subspan(slot * bt * rows * cols, bt * rows * cols);
  std::vector<double> out(d.size());
  for (std::size_t m = 0; m < rows; ++m)
    for (std::size_t n = 0; n < cols; ++n)
      for (std::size_t l = 0; l < bt; ++l) out[(m * cols + n) * bt + l] = d[(l * rows + m) * cols + n];
  return out;
}

std::vector<ReceiverMetrics> evaluate_slots(const std::vector<SlotSample>& slots, const GridConfig& grid,
                                            const std::vector<ModelReceiver>& models, bool baselines,
                                            std::size_t chunk) {
  NoGradGuard guard;
  std::vector<ReceiverMetrics> out;
  if (chunk == 0) chunk = 1;

  for (const auto& model : models) {
    MetricAccumulator acc;
    SpikeTrace trace;
    for (std::size_t start = 0; start < slots.size(); start += chunk) {
      const std::size_t end = std::min(slots.size(), start + chunk);
      std::vector<const ResourceGrid*> grids;
      for (std::size_t i = start; i < end; ++i) grids.push_back(&slots[i].received);
      const ForwardResult r = forward(model.config, model.params, grid, make_input(grids),
                                      model.config.variant == Variant::Spiking);
      trace.merge(r.trace);
      for (std::size_t i = start; i < end; ++i)
        acc.add(probs_in_payload_order(r.probs, i - start), slots[i].received.payload_bits, 1);
    }
    auto m = acc.result(model.id);
    m.trace = std::move(trace);
    out.push_back(std::move(m));
  }

  if (baselines) {
    for (const auto& id : kBaselineReceivers) {
      MetricAccumulator acc;
      for (const auto& s : slots) {
        const LlrGrid llr = id == "ls" ? ls_receiver(s.received, s.noise_var, grid)
                                       : genie_receiver(s.received, s.channel, s.noise_var, grid);
        std::vector<double> p(llr.llr.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(llr.llr[i])));
        acc.add(p, s.received.payload_bits, 1);
      }
      out.push_back(acc.result(id));
    }
  }
  return out;
}

std::vector<SlotSample> draw_sweep_slots(const GridConfig& grid, const std::vector<std::string>& profiles,
                                         const SweepPoint& point, std::size_t count, std::uint64_t seed) {
  if (profiles.empty()) throw std::invalid_argument("evaluation needs at least one channel profile");
  std::vector<SlotSample> slots;
  slots.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    const std::size_t index = i % profiles.size();
    SlotSample s = draw_slot_at(grid, profiles[index], point.delay_ns, point.doppler_hz, point.ebno_db, rng);
    s.profile = static_cast<std::uint32_t>(index);
    slots.push_back(std::move(s));
  }
  return slots;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
