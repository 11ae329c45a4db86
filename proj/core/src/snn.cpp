#include "sprx/snn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sprx/ops.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

std::string_view to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::FastSigmoid: return "fast-sigmoid";
    case SurrogateKind::ArcTan: return "arctan";
    case SurrogateKind::Sigmoid: return "sigmoid";
  }
  return "unknown";
}

SurrogateKind surrogate_from_string(std::string_view name) {
  if (name == "fast-sigmoid") return SurrogateKind::FastSigmoid;
  if (name == "arctan") return SurrogateKind::ArcTan;
  if (name == "sigmoid") return SurrogateKind::Sigmoid;
  throw std::invalid_argument("unknown surrogate '" + std::string(name) + "'");
}

std::string_view to_string(Combine op) {
  switch (op) {
    case Combine::Add: return "add";
    case Combine::And: return "and";
    case Combine::IAnd: return "iand";
  }
  return "unknown";
}

Combine combine_from_string(std::string_view name) {
  if (name == "add") return Combine::Add;
  if (name == "and") return Combine::And;
  if (name == "iand") return Combine::IAnd;
  throw std::invalid_argument("unknown combine op '" + std::string(name) + "'");
}

void LifParams::validate() const {
  if (!(beta > real(0) && beta <= real(1))) throw std::invalid_argument("LIF decay rate must lie in (0,1]");
  if (!(theta > real(0))) throw std::invalid_argument("LIF threshold must be positive");
  if (surrogate == SurrogateKind::FastSigmoid && !(slope > real(0)))
    throw std::invalid_argument("fast-sigmoid slope must be positive");
}

real LifParams::beta_from_time_constant(real tau) { return std::exp(-real(1) / tau); }

LifState LifState::initial(const Shape& shape) { return {Tensor::zeros(shape), Tensor::zeros(shape)}; }

real surrogate_grad(real membrane, const LifParams& params) {
  const real x = membrane - params.theta;
  switch (params.surrogate) {
    case SurrogateKind::Sigmoid: {
      const real e = std::exp(-x);
      if (!std::isfinite(e)) return real(0);
      return e / ((real(1) + e) * (real(1) + e));
    }
    case SurrogateKind::FastSigmoid: {
      const real d = real(1) + params.slope * std::abs(x);
      return real(1) / (d * d);
    }
    case SurrogateKind::ArcTan: {
      const real px = std::numbers::pi_v<real> * x;
      return real(1) / (real(1) + px * px);
    }
  }
  return real(0);
}

real surrogate_value(real membrane, const LifParams& params) {
  const real x = membrane - params.theta;
  switch (params.surrogate) {
    case SurrogateKind::Sigmoid: return real(1) / (real(1) + std::exp(-x));
    case SurrogateKind::FastSigmoid: return real(0.5) + x / (real(1) + params.slope * std::abs(x));
    case SurrogateKind::ArcTan:
      return real(0.5) + std::atan(std::numbers::pi_v<real> * x) / std::numbers::pi_v<real>;
  }
  return real(0);
}

Tensor spike(const Tensor& membrane, const LifParams& params) {
  const auto u = membrane.data();
  std::vector<real> out(u.size());
  if (params.mode == SpikeMode::Heaviside) {
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] > params.theta ? real(1) : real(0);
  } else {
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = surrogate_value(u[i], params);
  }
  return make_op_result(membrane.shape(), std::move(out), {membrane},
                        [membrane, params](std::span<const real> g, std::span<const real>) {
                          auto gu = grad_sink(membrane);
                          if (gu.empty()) return;
                          const auto u = membrane.data();
                          for (std::size_t i = 0; i < g.size(); ++i) gu[i] += g[i] * surrogate_grad(u[i], params);
                        });
}

Tensor lif_membrane(const Tensor& previous, const Tensor& input, const Tensor& previous_spikes,
                    const LifParams& params, const Tensor& beta_param) {
  if (previous.shape() != input.shape() || previous_spikes.shape() != input.shape()) {
    throw ShapeError("lif: state " + to_string(previous.shape()) + " does not match input " +
                     to_string(input.shape()));
  }
  if (beta_param.defined() && beta_param.numel() != 1)
    throw ShapeError("lif: learnable decay must be a single element, got " + to_string(beta_param.shape()));
  const real beta = beta_param.defined() ? beta_param.item() : params.beta;
  const real theta = params.theta;
  const auto u = previous.data();
  const auto x = input.data();
  const auto s = previous_spikes.data();
  std::vector<real> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = beta * u[i] + x[i] - s[i] * theta;

  // With binary spikes the reset is a constant for the backward pass. Relaxed
  // spikes are smooth, so the reset is differentiated like any other term.
  const bool reset_grad = params.mode == SpikeMode::Relaxed;
  std::vector<Tensor> inputs{previous, input};
  if (beta_param.defined()) inputs.push_back(beta_param);
  if (reset_grad) inputs.push_back(previous_spikes);
  const Tensor reset_src = reset_grad ? previous_spikes : Tensor();
  return make_op_result(input.shape(), std::move(out), std::move(inputs),
                        [previous, input, beta_param, beta, reset_src, theta](std::span<const real> g,
                                                                               std::span<const real>) {
                          if (auto gp = grad_sink(previous); !gp.empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += beta * g[i];
                          if (auto gi = grad_sink(input); !gi.empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                          if (auto gs = grad_sink(reset_src); !gs.empty())
                            for (std::size_t i = 0; i < g.size(); ++i) gs[i] -= theta * g[i];
                          if (auto gb = grad_sink(beta_param); !gb.empty()) {
                            const auto u = previous.data();
                            real acc = 0;
                            for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * u[i];
                            gb[0] += acc;
                          }
                        });
}

std::pair<Tensor, LifState> lif_step(const LifState& state, const Tensor& input, const LifParams& params,
                                     const Tensor& beta_param) {
  const LifState& prev = state.defined() ? state : LifState::initial(input.shape());
  Tensor membrane = lif_membrane(prev.membrane, input, prev.spikes, params, beta_param);
  Tensor spikes = spike(membrane, params);
  return {spikes, LifState{membrane, spikes}};
}

Tensor combine(Combine op, const Tensor& input, const Tensor& residual) {
  switch (op) {
    case Combine::Add: return add(input, residual);
    case Combine::And: return logical_and(input, residual);
    case Combine::IAnd: return logical_iand(input, residual);
  }
  throw std::invalid_argument("unknown combine op");
}

namespace {

void check_channels(const Tensor& input, const SewBlockConfig& config) {
  const std::size_t axis = input.dim() == 4 ? 1 : 0;
  if (input.dim() < 3 || input.extent(axis) != config.channels) {
    throw ShapeError("residual block expects " + std::to_string(config.channels) + " channels, got input " +
                     to_string(input.shape()));
  }
}

}  // namespace

BlockResult sew_block_forward(const Tensor& input, const SewBlockConfig& config, const ResidualBlockParams& params,
                              const BlockStates& states, const LifParams& lif) {
  check_channels(input, config);
  BlockResult r;
  Tensor h = layer_norm(conv2d(input, params.conv1.kernel, params.conv1.bias), params.norm1.gamma,
                        params.norm1.shift);
  std::tie(r.first_spikes, r.states.first) = lif_step(states.first, h, lif, params.beta1);
  h = layer_norm(conv2d(r.first_spikes, params.conv2.kernel, params.conv2.bias), params.norm2.gamma,
                 params.norm2.shift);
  std::tie(r.second_spikes, r.states.second) = lif_step(states.second, h, lif, params.beta2);
  r.output = combine(config.combine, input, r.second_spikes);
  return r;
}

BlockResult traditional_block_forward(const Tensor& input, const SewBlockConfig& config,
                                      const ResidualBlockParams& params, const BlockStates& states,
                                      const LifParams& lif) {
  check_channels(input, config);
  BlockResult r;
  Tensor h = layer_norm(input, params.norm1.gamma, params.norm1.shift);
  std::tie(r.first_spikes, r.states.first) = lif_step(states.first, h, lif, params.beta1);
  h = conv2d(r.first_spikes, params.conv1.kernel, params.conv1.bias);
  h = layer_norm(h, params.norm2.gamma, params.norm2.shift);
  std::tie(r.second_spikes, r.states.second) = lif_step(states.second, h, lif, params.beta2);
  h = conv2d(r.second_spikes, params.conv2.kernel, params.conv2.bias);
  r.output = add(input, h);
  return r;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
