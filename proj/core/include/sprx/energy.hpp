#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sprx/config.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

/// Spike counters for one recording site. LIF sites hold binary spikes; block
/// output sites of SEW-ADD blocks may hold small integer counts.
struct SiteTrace {
  std::string name;
  bool lif = true;
  std::uint64_t neurons = 0;              // per batch element
  std::uint64_t batch = 0;
  std::vector<double> events_per_step;    // summed over the batch
  std::uint64_t ever_active = 0;          // neurons (summed over batch) that fired at least once

  double total_events() const;
};

/// Merging is elementwise addition over matching sites, so it is associative
/// and commutative.
struct SpikeTrace {
  std::size_t steps = 0;
  std::vector<SiteTrace> sites;

  const SiteTrace* find(const std::string& name) const;
  void merge(const SpikeTrace& other);
  bool empty() const { return sites.empty(); }
};

enum class ActivationCount { Events, EverFired };

/// A = 100 a / (B T N) over LIF sites, N = total LIF neurons per batch element.
/// Events counts neuron-step spikes; EverFired counts neurons that fired at
/// any step, so it is not divided by T.
double activation_probability(const SpikeTrace& trace, ActivationCount mode = ActivationCount::Events);

/// R_s = sum_t N_s^t / N_n, averaged over the batch.
double spiking_rate(const SiteTrace& site);

enum class LayerKind { Conv, Norm, Elementwise };

struct LayerDescriptor {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  std::size_t kernel = 1;
  std::size_t c_in = 0, c_out = 0;
  std::size_t height = 0, width = 0;
  /// Spike site feeding the layer. Gated layers are charged per spike event
  /// at the accumulate cost; ungated layers at the MAC cost `repeats` times.
  std::optional<std::string> gate;
  std::size_t repeats = 1;
};

/// Conv: K^2 Cin H W Cout. Norm and elementwise: Cin H W.
std::uint64_t flops_ann(const LayerDescriptor& layer);

/// Energies per operation in pJ.
struct EnergyTable {
  double mult_32 = 3.7, add_32 = 0.9;
  double mac_32 = 4.6, ac_32 = 0.9;
  double mac_8 = 1.1, ac_8 = 0.2;

  /// 32 and 8 bits come from the table; other widths scale the 32-bit
  /// values by (Q/32)^1.25 for MAC and Q/32 for AC.
  double mac(unsigned bits) const;
  double ac(unsigned bits) const;
};

struct LayerEnergy {
  std::string name;
  std::uint64_t flops = 0;
  std::optional<double> spike_rate;
  double ann_pj = 0;
  double snn_pj = 0;
};

struct EnergyReport {
  unsigned bits = 32;
  std::vector<LayerEnergy> layers;
  double ann_total_pj = 0;
  double snn_total_pj = 0;
  std::optional<double> activation_percent;

  double ratio() const { return snn_total_pj > 0 ? ann_total_pj / snn_total_pj : 0.0; }
  nlohmann::json to_json() const;
  std::string to_table() const;
  std::string to_csv() const;
};

/// Per-layer ANN energy FLOPS * E_MAC and spiking energy FLOPS * R_s * E_AC
/// for gated layers, FLOPS * repeats * E_MAC otherwise. Throws when a gated
/// layer's site is missing from the trace.
EnergyReport energy(const std::vector<LayerDescriptor>& layers, const SpikeTrace& trace, const EnergyTable& table,
                    unsigned bits = 32);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
