#include "sprx/energy.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

double SiteTrace::total_events() const {
  return std::accumulate(events_per_step.begin(), events_per_step.end(), 0.0);
}

const SiteTrace* SpikeTrace::find(const std::string& name) const {
  for (const auto& s : sites)
    if (s.name == name) return &s;
  return nullptr;
}

void SpikeTrace::merge(const SpikeTrace& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (steps != other.steps || sites.size() != other.sites.size())
    throw std::invalid_argument("cannot merge traces with different layouts");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    auto& a = sites[i];
    const auto& b = other.sites[i];
    if (a.name != b.name || a.neurons != b.neurons)
      throw std::invalid_argument("cannot merge trace site '" + b.name + "' into '" + a.name + "'");
    a.batch += b.batch;
    a.ever_active += b.ever_active;
    for (std::size_t t = 0; t < a.events_per_step.size(); ++t) a.events_per_step[t] += b.events_per_step[t];
  }
}

double activation_probability(const SpikeTrace& trace, ActivationCount mode) {
  double active = 0, neurons = 0;
  std::uint64_t batch = 0;
  for (const auto& s : trace.sites) {
    if (!s.lif) continue;
    active += mode == ActivationCount::Events ? s.total_events() : static_cast<double>(s.ever_active);
    neurons += static_cast<double>(s.neurons);
    batch = s.batch;
  }
  if (neurons == 0 || batch == 0 || trace.steps == 0) throw std::invalid_argument("activation_probability: empty trace");
  const double steps = mode == ActivationCount::Events ? static_cast<double>(trace.steps) : 1.0;
  return 100.0 * active / (static_cast<double>(batch) * steps * neurons);
}

double spiking_rate(const SiteTrace& site) {
  if (site.neurons == 0) throw std::invalid_argument("spiking_rate: site '" + site.name + "' has no neurons");
  if (site.batch == 0) throw std::invalid_argument("spiking_rate: site '" + site.name + "' has no samples");
  return site.total_events() / (static_cast<double>(site.neurons) * static_cast<double>(site.batch));
}

std::uint64_t flops_ann(const LayerDescriptor& l) {
  const std::uint64_t plane = static_cast<std::uint64_t>(l.height) * l.width;
  switch (l.kind) {
    case LayerKind::Conv: return static_cast<std::uint64_t>(l.kernel) * l.kernel * l.c_in * plane * l.c_out;
    case LayerKind::Norm:
    case LayerKind::Elementwise: return static_cast<std::uint64_t>(l.c_in) * plane;
  }
  throw std::invalid_argument("flops_ann: unknown layer kind for '" + l.name + "'");
}

double EnergyTable::mac(unsigned bits) const {
  if (bits == 32) return mac_32;
  if (bits == 8) return mac_8;
  return mac_32 * std::pow(bits / 32.0, 1.25);
}

double EnergyTable::ac(unsigned bits) const {
  if (bits == 32) return ac_32;
  if (bits == 8) return ac_8;
  return ac_32 * (bits / 32.0);
}

EnergyReport energy(const std::vector<LayerDescriptor>& layers, const SpikeTrace& trace, const EnergyTable& table,
                    unsigned bits) {
  if (bits == 0 || bits > 32) throw std::invalid_argument("energy: bit width must lie in [1, 32]");
  EnergyReport r;
  r.bits = bits;
  const double e_mac = table.mac(bits), e_ac = table.ac(bits);
  for (const auto& l : layers) {
    LayerEnergy e;
    e.name = l.name;
    e.flops = flops_ann(l);
    e.ann_pj = static_cast<double>(e.flops) * e_mac;
    if (l.gate) {
      const SiteTrace* site = trace.find(*l.gate);
      if (!site) throw std::invalid_argument("energy: no trace for spike site '" + *l.gate + "' of layer " + l.name);
      e.spike_rate = spiking_rate(*site);
      e.snn_pj = static_cast<double>(e.flops) * *e.spike_rate * e_ac;
    } else {
      e.snn_pj = static_cast<double>(e.flops) * static_cast<double>(l.repeats) * e_mac;
    }
    r.ann_total_pj += e.ann_pj;
    r.snn_total_pj += e.snn_pj;
    r.layers.push_back(std::move(e));
  }
  if (!trace.empty()) r.activation_percent = activation_probability(trace);
  return r;
}

nlohmann::json EnergyReport::to_json() const {
  nlohmann::json layers_json = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json row = {{"name", l.name}, {"flops", l.flops}, {"ann_pj", l.ann_pj}, {"snn_pj", l.snn_pj}};
    row["spike_rate"] = l.spike_rate ? nlohmann::json(*l.spike_rate) : nlohmann::json(nullptr);
    layers_json.push_back(std::move(row));
  }
  nlohmann::json j = {{"bits", bits},
                      {"layers", layers_json},
                      {"ann_total_pj", ann_total_pj},
                      {"snn_total_pj", snn_total_pj},
                      {"ratio", ratio()}};
  j["activation_percent"] = activation_percent ? nlohmann::json(*activation_percent) : nlohmann::json(nullptr);
  return j;
}

std::string EnergyReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(18) << "layer" << std::right << std::setw(12) << "flops" << std::setw(10) << "R_s"
     << std::setw(16) << "ann_pj" << std::setw(16) << "snn_pj" << '\n';
  os << std::fixed;
  for (const auto& l : layers) {
    os << std::left << std::setw(18) << l.name << std::right << std::setw(12) << l.flops << std::setw(10);
    if (l.spike_rate)
      os << std::setprecision(4) << *l.spike_rate;
    else
      os << "-";
    os << std::setprecision(1) << std::setw(16) << l.ann_pj << std::setw(16) << l.snn_pj << '\n';
  }
  os << std::left << std::setw(40) << "total" << std::right << std::setprecision(1) << std::setw(16) << ann_total_pj
     << std::setw(16) << snn_total_pj << '\n';
  os << "ANN/SNN energy ratio: " << std::setprecision(3) << ratio() << '\n';
  if (activation_percent) os << "activation probability: " << std::setprecision(3) << *activation_percent << " %\n";
  return os.str();
}

std::string EnergyReport::to_csv() const {
  std::ostringstream os;
  os << "layer,flops,spike_rate,ann_pj,snn_pj\n";
  os << std::setprecision(10);
  for (const auto& l : layers) {
    os << l.name << ',' << l.flops << ',';
    if (l.spike_rate) os << *l.spike_rate;
    os << ',' << l.ann_pj << ',' << l.snn_pj << '\n';
  }
  return os.str();
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
