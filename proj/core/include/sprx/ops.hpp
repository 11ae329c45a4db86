#pragma once

#include <span>
#include <vector>

#include "sprx/tensor.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

// Elementwise arithmetic. Shapes must match exactly; there is no broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, real factor);
Tensor add_scalar(const Tensor& x, real value);

/// a AND b for a, b in {0,1}, computed as a*b so it stays differentiable.
Tensor logical_and(const Tensor& a, const Tensor& b);
/// (NOT a) AND b, computed as (1-a)*b.
Tensor logical_iand(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

/// Same-padded stride-1 cross-correlation.
///
/// input is [B,Cin,H,W] (or [Cin,H,W]); kernel is [Cout,Cin,K,K] with odd K;
/// bias is [Cout]. Output keeps the spatial extent of the input.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

/// Normalizes across the channel axis independently at each spatial position,
/// then applies a per-channel affine transform. input is [B,C,H,W] or [C,H,W];
/// gamma and shift are [C].
Tensor layer_norm(const Tensor& input, const Tensor& gamma, const Tensor& shift, real eps = real(1e-5));

/// Mean along one axis; the axis is removed from the result shape.
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& parts);

/// Gathers the given indices along `axis`.
Tensor select(const Tensor& x, std::size_t axis, std::span<const std::size_t> indices);

/// Mean binary cross entropy over every element. Probabilities are clamped to
/// [1e-7, 1-1e-7]; labels must be exactly 0 or 1.
Tensor bce_loss(const Tensor& probs, const Tensor& labels);

inline constexpr real kProbClamp = real(1e-7);

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
