#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sprx/energy.hpp"
#include "sprx/ofdm.hpp"
#include "sprx/snn.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

enum class Variant { Spiking, Neural };
enum class BlockKind { Sew, Traditional };

std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);
std::string_view to_string(BlockKind k);
BlockKind block_kind_from_string(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::Spiking;
  std::size_t filters = 16;
  std::size_t blocks = 3;
  std::size_t kernel = 3;
  std::size_t time_steps = 2;
  Combine combine = Combine::Add;
  BlockKind block = BlockKind::Sew;  // Spiking only; Neural always uses additive blocks
  std::size_t bits = 2;              // bits per symbol
  LifParams lif;
  bool average_logits = false;  // sigmoid of mean logits instead of mean of sigmoids

  void validate() const;
  /// Steps actually unrolled: 1 for the Neural variant.
  std::size_t steps() const { return variant == Variant::Neural ? 1 : time_steps; }
};

nlohmann::json to_json(const ModelConfig& c);
/// Strict: unknown keys raise std::invalid_argument naming the key.
ModelConfig model_config_from_json(const nlohmann::json& j);

inline constexpr std::size_t kInputChannels = 4;

/// Named parameter tensors in a fixed order.
class ParamSet {
 public:
  void add(std::string name, Tensor t);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Parameter names and shapes, a function of the config alone.
std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& config);

/// Convolution weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); norm
/// gains 1, shifts 0; learnable decays start at config.lif.beta.
ParamSet init_params(const ModelConfig& config, Rng& rng);

/// All parameters zero (norm gains included).
ParamSet zero_params(const ModelConfig& config);

struct ForwardResult {
  Tensor probs;        // [B, bits, M', N]
  Tensor mean_logits;  // [B, bits, M', N], no history
  SpikeTrace trace;    // populated when requested (Spiking only)
};

/// Runs the receiver network on input [B, 4, M, N] (Re Y, Im Y, Re P', Im P').
///
/// The first convolution sees the same image at every step, so it is
/// evaluated once; everything after it runs per step with persistent LIF
/// state. DMRS rows are removed before the 1x1 head.
ForwardResult forward(const ModelConfig& config, const ParamSet& params, const GridConfig& grid,
                      const Tensor& input, bool record_trace = false);

/// Stacks received grids into the [B, 4, M, N] network input.
Tensor make_input(const std::vector<const ResourceGrid*>& slots);
/// Payload bits as [B, bits, M', N] labels.
Tensor make_labels(const std::vector<const ResourceGrid*>& slots, const GridConfig& grid);

/// logit(p) = log(p / (1 - p)) with p clamped to [kProbClamp, 1 - kProbClamp].
std::vector<float> llr_from_probs(std::span<const real> probs);

/// Layers of the network for energy accounting, with spike sites attached for
/// the Spiking variant.
std::vector<LayerDescriptor> layer_descriptors(const ModelConfig& config, const GridConfig& grid);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
