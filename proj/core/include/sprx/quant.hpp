#pragma once

#include <map>
#include <string>

#include "sprx/model.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

/// Symmetric per-tensor uniform quantizer: W_q = s * clip(round(W / s), lo, hi).
struct QuantSpec {
  unsigned bits = 8;
  real scale = real(1);
  real lo = real(-128), hi = real(127);

  /// lo = -2^(Q-1), hi = 2^(Q-1) - 1.
  static QuantSpec for_bits(unsigned bits, real scale);
  void validate() const;
};

/// s = max|W| / (2^(Q-1) - 1); a tensor of zeros gets s = 1.
real calibrate_scale(const Tensor& w, unsigned bits);

/// Fake quantization with a straight-through backward pass: the gradient
/// passes unchanged where lo <= W/s <= hi and is zero outside.
Tensor fake_quantize(const Tensor& w, const QuantSpec& spec);

/// True when every element equals s * k for an integer k in [lo, hi].
bool on_grid(const Tensor& w, const QuantSpec& spec);

using ScaleMap = std::map<std::string, real>;

ScaleMap calibrate_scales(const ParamSet& params, unsigned bits);

/// Quantized view of `params`; differentiable through the STE.
ParamSet fake_quantize_params(const ParamSet& params, const ScaleMap& scales, unsigned bits);

/// Post-training quantization: calibrates and quantizes without retraining.
/// Returns detached tensors together with the scales used.
std::pair<ParamSet, ScaleMap> post_training_quantize(const ParamSet& params, unsigned bits);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
