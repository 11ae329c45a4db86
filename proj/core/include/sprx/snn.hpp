#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "sprx/tensor.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

enum class SurrogateKind { FastSigmoid, ArcTan, Sigmoid };

std::string_view to_string(SurrogateKind kind);
SurrogateKind surrogate_from_string(std::string_view name);

/// How the spike nonlinearity behaves in the forward pass.
///
/// Heaviside emits binary spikes and substitutes the surrogate derivative in
/// the backward pass. Relaxed uses the smooth surrogate function itself in the
/// forward pass, so autodiff is exact; it exists for gradient verification.
enum class SpikeMode { Heaviside, Relaxed };

struct LifParams {
  real beta = real(0.95);
  real theta = real(1.0);
  bool learnable_beta = false;
  SurrogateKind surrogate = SurrogateKind::ArcTan;
  real slope = real(25);  // FastSigmoid only
  SpikeMode mode = SpikeMode::Heaviside;

  /// Throws std::invalid_argument unless 0 < beta <= 1 and theta > 0.
  void validate() const;
  /// beta = exp(-1/tau) for an RC time constant measured in steps.
  static real beta_from_time_constant(real tau);
};

/// Membrane potentials and the spikes emitted at the previous step.
struct LifState {
  Tensor membrane;
  Tensor spikes;

  static LifState initial(const Shape& shape);
  bool defined() const { return membrane.defined(); }
};

/// dS/dU substitute used in place of the Heaviside derivative.
real surrogate_grad(real membrane, const LifParams& params);
/// Smooth stand-in whose derivative is surrogate_grad (Relaxed mode forward).
real surrogate_value(real membrane, const LifParams& params);

/// Threshold nonlinearity: 1 where U > theta (strict), else 0. The backward
/// pass uses surrogate_grad regardless of mode.
Tensor spike(const Tensor& membrane, const LifParams& params);

/// U[t] = beta * U[t-1] + I[t] - S[t-1] * theta.
///
/// The reset term is treated as a constant in the backward pass unless the
/// spikes are relaxed. When `beta_param` is defined (learnable decay) it must
/// be a one-element tensor and overrides params.beta.
Tensor lif_membrane(const Tensor& previous, const Tensor& input, const Tensor& previous_spikes,
                    const LifParams& params, const Tensor& beta_param = {});

/// One LIF update. Returns the spikes and the successor state.
std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input, const LifParams& params,
                                     const Tensor& beta_param = {});

enum class Combine { Add, And, IAnd };

std::string_view to_string(Combine op);
Combine combine_from_string(std::string_view name);

/// g = combine(I, O) for the spike-element-wise residual connection.
Tensor combine(Combine op, const Tensor& input, const Tensor& residual);

struct ConvParams {
  Tensor kernel;  // [Cout,Cin,K,K]
  Tensor bias;    // [Cout]
};

struct NormParams {
  Tensor gamma;  // [C]
  Tensor shift;  // [C]
};

struct ResidualBlockParams {
  ConvParams conv1, conv2;
  NormParams norm1, norm2;
  Tensor beta1, beta2;  // defined only with learnable decay
};

struct SewBlockConfig {
  std::size_t channels = 16;
  std::size_t kernel = 3;
  Combine combine = Combine::Add;
};

struct BlockStates {
  LifState first, second;
};

struct BlockResult {
  Tensor output;
  BlockStates states;
  Tensor first_spikes;
  Tensor second_spikes;
};

/// Spike-element-wise residual block:
/// O = LIF(Norm(Conv(LIF(Norm(Conv(I)))))), output = combine(I, O).
BlockResult sew_block_forward(const Tensor& input, const SewBlockConfig& config, const ResidualBlockParams& params,
                              const BlockStates& states, const LifParams& lif);

/// Conventional pre-activation residual block with LIF in place of ReLU:
/// output = I + Conv(LIF(Norm(Conv(LIF(Norm(I)))))).
BlockResult traditional_block_forward(const Tensor& input, const SewBlockConfig& config,
                                      const ResidualBlockParams& params, const BlockStates& states,
                                      const LifParams& lif);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
