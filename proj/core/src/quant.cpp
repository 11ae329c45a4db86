#include "sprx/quant.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sprx {
inline namespace SPRX_PRECISION_NS {

QuantSpec QuantSpec::for_bits(unsigned bits, real scale) {
  if (bits < 2 || bits > 16) throw std::invalid_argument("quantizer bit width must lie in [2, 16]");
  const real half = static_cast<real>(1u << (bits - 1));
  QuantSpec q{bits, scale, -half, half - real(1)};
  q.validate();
  return q;
}

void QuantSpec::validate() const {
  if (!(scale > real(0)) || !std::isfinite(scale)) throw std::invalid_argument("quantizer scale must be positive");
  if (!(lo < hi)) throw std::invalid_argument("quantizer clip bounds must satisfy lo < hi");
}

real calibrate_scale(const Tensor& w, unsigned bits) {
  real mx = 0;
  for (real v : w.data()) mx = std::max(mx, std::abs(v));
  if (mx == real(0)) return real(1);
  return mx / static_cast<real>((1u << (bits - 1)) - 1);
}

Tensor fake_quantize(const Tensor& w, const QuantSpec& spec) {
  spec.validate();
  const auto x = w.data();
  std::vector<real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const real k = std::clamp(std::nearbyint(x[i] / spec.scale), spec.lo, spec.hi);
    out[i] = spec.scale * k;
  }
  return make_op_result(w.shape(), std::move(out), {w}, [w, spec](std::span<const real> g, std::span<const real>) {
    auto gw = grad_sink(w);
    if (gw.empty()) return;
    const auto x = w.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const real r = x[i] / spec.scale;
      if (r >= spec.lo && r <= spec.hi) gw[i] += g[i];
    }
  });
}

bool on_grid(const Tensor& w, const QuantSpec& spec) {
  for (real v : w.data()) {
    const real k = std::nearbyint(v / spec.scale);
    if (k < spec.lo || k > spec.hi || spec.scale * k != v) return false;
  }
  return true;
}

ScaleMap calibrate_scales(const ParamSet& params, unsigned bits) {
  ScaleMap s;
  for (const auto& [name, t] : params.entries()) s[name] = calibrate_scale(t, bits);
  return s;
}

ParamSet fake_quantize_params(const ParamSet& params, const ScaleMap& scales, unsigned bits) {
  ParamSet q;
  for (const auto& [name, t] : params.entries()) {
    auto it = scales.find(name);
    if (it == scales.end()) throw std::invalid_argument("no quantizer scale for parameter '" + name + "'");
    q.add(name, fake_quantize(t, QuantSpec::for_bits(bits, it->second)));
  }
  return q;
}

std::pair<ParamSet, ScaleMap> post_training_quantize(const ParamSet& params, unsigned bits) {
  ScaleMap scales = calibrate_scales(params, bits);
  ParamSet out;
  NoGradGuard guard;
  for (const auto& [name, t] : params.entries()) {
    Tensor q = fake_quantize(t, QuantSpec::for_bits(bits, scales.at(name)));
    out.add(name, Tensor(q.shape(), std::vector<real>(q.data().begin(), q.data().end())));
  }
  return {std::move(out), std::move(scales)};
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
