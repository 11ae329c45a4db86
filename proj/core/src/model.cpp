#include "sprx/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sprx/ops.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

std::string_view to_string(Variant v) { return v == Variant::Spiking ? "spiking" : "neural"; }

Variant variant_from_string(std::string_view name) {
  if (name == "spiking") return Variant::Spiking;
  if (name == "neural") return Variant::Neural;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

std::string_view to_string(BlockKind k) { return k == BlockKind::Sew ? "sew" : "traditional"; }

BlockKind block_kind_from_string(std::string_view name) {
  if (name == "sew") return BlockKind::Sew;
  if (name == "traditional") return BlockKind::Traditional;
  throw std::invalid_argument("unknown block kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (filters == 0) throw std::invalid_argument("model.filters must be positive");
  if (blocks == 0) throw std::invalid_argument("model.blocks must be at least 1");
  if (kernel % 2 == 0) throw std::invalid_argument("model.kernel must be odd");
  if (time_steps == 0) throw std::invalid_argument("model.time_steps must be at least 1");
  if (bits != 2 && bits != 4) throw std::invalid_argument("model.bits must be 2 or 4");
  if (!(lif.beta > real(0) && lif.beta <= real(1))) throw std::invalid_argument("model.beta must lie in (0, 1]");
  if (!(lif.theta > real(0))) throw std::invalid_argument("model.theta must be positive");
  if (lif.surrogate == SurrogateKind::FastSigmoid && !(lif.slope > real(0)))
    throw std::invalid_argument("model.slope must be positive");
  lif.validate();
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", std::string(to_string(c.variant))},
          {"filters", c.filters},
          {"blocks", c.blocks},
          {"kernel", c.kernel},
          {"time_steps", c.time_steps},
          {"combine", std::string(to_string(c.combine))},
          {"block", std::string(to_string(c.block))},
          {"bits", c.bits},
          {"beta", c.lif.beta},
          {"theta", c.lif.theta},
          {"learnable_beta", c.lif.learnable_beta},
          {"surrogate", std::string(to_string(c.lif.surrogate))},
          {"slope", c.lif.slope},
          {"average_logits", c.average_logits}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("model: expected an object");
  ModelConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "variant") c.variant = variant_from_string(v.get<std::string>());
      else if (key == "filters") c.filters = v.get<std::size_t>();
      else if (key == "blocks") c.blocks = v.get<std::size_t>();
      else if (key == "kernel") c.kernel = v.get<std::size_t>();
      else if (key == "time_steps") c.time_steps = v.get<std::size_t>();
      else if (key == "combine") c.combine = combine_from_string(v.get<std::string>());
      else if (key == "block") c.block = block_kind_from_string(v.get<std::string>());
      else if (key == "bits") c.bits = v.get<std::size_t>();
      else if (key == "beta") c.lif.beta = v.get<real>();
      else if (key == "theta") c.lif.theta = v.get<real>();
      else if (key == "learnable_beta") c.lif.learnable_beta = v.get<bool>();
      else if (key == "surrogate") c.lif.surrogate = surrogate_from_string(v.get<std::string>());
      else if (key == "slope") c.lif.slope = v.get<real>();
      else if (key == "average_logits") c.average_logits = v.get<bool>();
      else throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument("model." + key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

void ParamSet::add(std::string name, Tensor t) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_[name] = entries_.size();
  entries_.emplace_back(std::move(name), std::move(t));
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& [_, t] : entries_) n += t.numel();
  return n;
}

namespace {

std::string block_name(std::size_t i) { return "block" + std::to_string(i); }

bool learnable(const ModelConfig& c) { return c.variant == Variant::Spiking && c.lif.learnable_beta; }

}  // namespace

std::vector<std::pair<std::string, Shape>> param_layout(const ModelConfig& c) {
  const std::size_t f = c.filters, k = c.kernel;
  std::vector<std::pair<std::string, Shape>> out;
  out.push_back({"input.conv.weight", {f, kInputChannels, k, k}});
  out.push_back({"input.conv.bias", {f}});
  if (learnable(c)) out.push_back({"input.beta", {1}});
  for (std::size_t i = 0; i < c.blocks; ++i) {
    const std::string b = block_name(i);
    out.push_back({b + ".conv1.weight", {f, f, k, k}});
    out.push_back({b + ".conv1.bias", {f}});
    out.push_back({b + ".norm1.gamma", {f}});
    out.push_back({b + ".norm1.shift", {f}});
    out.push_back({b + ".conv2.weight", {f, f, k, k}});
    out.push_back({b + ".conv2.bias", {f}});
    out.push_back({b + ".norm2.gamma", {f}});
    out.push_back({b + ".norm2.shift", {f}});
    if (learnable(c)) {
      out.push_back({b + ".beta1", {1}});
      out.push_back({b + ".beta2", {1}});
    }
  }
  out.push_back({"head.conv.weight", {c.bits, f, 1, 1}});
  out.push_back({"head.conv.bias", {c.bits}});
  return out;
}

ParamSet init_params(const ModelConfig& config, Rng& rng) {
  config.validate();
  ParamSet ps;
  std::size_t fan_in = 1;
  for (auto& [name, shape] : param_layout(config)) {
    Tensor t(shape, real(0), true);
    auto d = t.mutable_data();
    const auto ends_with = [&name](std::string_view s) {
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".weight")) fan_in = shape[1] * shape[2] * shape[3];
    if (ends_with(".weight") || ends_with(".bias")) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (auto& v : d) v = static_cast<real>(u(rng));
    } else if (ends_with(".gamma")) {
      std::fill(d.begin(), d.end(), real(1));
    } else if (name.find("beta") != std::string::npos) {
      std::fill(d.begin(), d.end(), config.lif.beta);
    }
    ps.add(name, std::move(t));
  }
  return ps;
}

ParamSet zero_params(const ModelConfig& config) {
  ParamSet ps;
  for (auto& [name, shape] : param_layout(config)) ps.add(name, Tensor(shape, real(0), true));
  return ps;
}

namespace {

ResidualBlockParams block_params(const ParamSet& p, std::size_t i, bool with_beta) {
  const std::string b = block_name(i);
  ResidualBlockParams r;
  r.conv1 = {p.at(b + ".conv1.weight"), p.at(b + ".conv1.bias")};
  r.conv2 = {p.at(b + ".conv2.weight"), p.at(b + ".conv2.bias")};
  r.norm1 = {p.at(b + ".norm1.gamma"), p.at(b + ".norm1.shift")};
  r.norm2 = {p.at(b + ".norm2.gamma"), p.at(b + ".norm2.shift")};
  if (with_beta) {
    r.beta1 = p.at(b + ".beta1");
    r.beta2 = p.at(b + ".beta2");
  }
  return r;
}

class TraceRecorder {
 public:
  TraceRecorder(bool enabled, std::size_t steps) : enabled_(enabled) { trace_.steps = steps; }

  void record(const std::string& name, bool lif, const Tensor& x, std::size_t step) {
    if (!enabled_) return;
    const std::size_t batch = x.extent(0), per = x.numel() / batch;
    auto it = std::find_if(trace_.sites.begin(), trace_.sites.end(), [&](const SiteTrace& s) { return s.name == name; });
    if (it == trace_.sites.end()) {
      SiteTrace s;
      s.name = name;
      s.lif = lif;
      s.neurons = per;
      s.batch = batch;
      s.events_per_step.assign(trace_.steps, 0.0);
      trace_.sites.push_back(std::move(s));
      masks_.emplace_back(x.numel(), 0);
      it = trace_.sites.end() - 1;
    }
    auto& mask = masks_[static_cast<std::size_t>(it - trace_.sites.begin())];
    double sum = 0;
    const auto d = x.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      sum += static_cast<double>(d[i]);
      if (d[i] != real(0)) mask[i] = 1;
    }
    it->events_per_step[step] += sum;
  }

  SpikeTrace finish() {
    for (std::size_t s = 0; s < trace_.sites.size(); ++s)
      trace_.sites[s].ever_active = static_cast<std::uint64_t>(std::count(masks_[s].begin(), masks_[s].end(), 1));
    return std::move(trace_);
  }

 private:
  bool enabled_;
  SpikeTrace trace_;
  std::vector<std::vector<std::uint8_t>> masks_;
};

Tensor neural_block(const Tensor& x, const ResidualBlockParams& p) {
  Tensor h = relu(layer_norm(x, p.norm1.gamma, p.norm1.shift));
  h = conv2d(h, p.conv1.kernel, p.conv1.bias);
  h = relu(layer_norm(h, p.norm2.gamma, p.norm2.shift));
  h = conv2d(h, p.conv2.kernel, p.conv2.bias);
  return add(x, h);
}

void check_input(const ModelConfig& config, const GridConfig& grid, const Tensor& input) {
  if (input.dim() != 4 || input.extent(1) != kInputChannels || input.extent(2) != grid.symbols ||
      input.extent(3) != grid.subcarriers) {
    throw ShapeError("model input must be [B, 4, " + std::to_string(grid.symbols) + ", " +
                     std::to_string(grid.subcarriers) + "], got " + to_string(input.shape()));
  }
  if (config.bits != grid.bits_per_symbol())
    throw std::invalid_argument("model emits " + std::to_string(config.bits) + " bits per symbol but the grid carries " +
                                std::to_string(grid.bits_per_symbol()));
}

}  // namespace

ForwardResult forward(const ModelConfig& config, const ParamSet& params, const GridConfig& grid, const Tensor& input,
                      bool record_trace) {
  check_input(config, grid, input);
  const auto rows = grid.data_rows();
  const std::size_t steps = config.steps();
  const bool with_beta = learnable(config);
  std::vector<ResidualBlockParams> blocks;
  for (std::size_t i = 0; i < config.blocks; ++i) blocks.push_back(block_params(params, i, with_beta));
  const Tensor& head_w = params.at("head.conv.weight");
  const Tensor& head_b = params.at("head.conv.bias");

  ForwardResult out;
  const Tensor stem = conv2d(input, params.at("input.conv.weight"), params.at("input.conv.bias"));
  std::vector<Tensor> logits;

  if (config.variant == Variant::Neural) {
    Tensor h = relu(stem);
    for (const auto& b : blocks) h = neural_block(h, b);
    logits.push_back(conv2d(select(h, 2, rows), head_w, head_b));
  } else {
    TraceRecorder rec(record_trace, steps);
    const Tensor input_beta = with_beta ? params.at("input.beta") : Tensor();
    const SewBlockConfig bc{config.filters, config.kernel, config.combine};
    LifState stem_state;
    std::vector<BlockStates> states(config.blocks);
    for (std::size_t t = 0; t < steps; ++t) {
      Tensor h;
      std::tie(h, stem_state) = lif_step(stem_state, stem, config.lif, input_beta);
      rec.record("input.lif", true, h, t);
      for (std::size_t i = 0; i < config.blocks; ++i) {
        BlockResult r = config.block == BlockKind::Sew
                            ? sew_block_forward(h, bc, blocks[i], states[i], config.lif)
                            : traditional_block_forward(h, bc, blocks[i], states[i], config.lif);
        states[i] = r.states;
        rec.record(block_name(i) + ".lif1", true, r.first_spikes, t);
        rec.record(block_name(i) + ".lif2", true, r.second_spikes, t);
        if (config.block == BlockKind::Sew) rec.record(block_name(i) + ".out", false, r.output, t);
        h = r.output;
      }
      logits.push_back(conv2d(select(h, 2, rows), head_w, head_b));
    }
    out.trace = rec.finish();
  }

  if (logits.size() == 1) {
    out.probs = sigmoid(logits[0]);
  } else if (config.average_logits) {
    out.probs = sigmoid(mean(stack(logits), 0));
  } else {
    std::vector<Tensor> probs;
    for (const auto& l : logits) probs.push_back(sigmoid(l));
    out.probs = mean(stack(probs), 0);
  }
  {
    NoGradGuard guard;
    out.mean_logits = logits.size() == 1 ? logits[0].detach() : mean(stack(logits), 0).detach();
  }
  return out;
}

Tensor make_input(const std::vector<const ResourceGrid*>& slots) {
  if (slots.empty()) throw std::invalid_argument("make_input: empty batch");
  const std::size_t m_n = slots[0]->values.rows, n_n = slots[0]->values.cols, plane = m_n * n_n;
  std::vector<real> data(slots.size() * kInputChannels * plane);
  for (std::size_t b = 0; b < slots.size(); ++b) {
    const auto& s = *slots[b];
    if (s.values.rows != m_n || s.values.cols != n_n) throw ShapeError("make_input: slots differ in grid size");
    real* base = data.data() + b * kInputChannels * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      base[i] = s.values.values[i].real();
      base[plane + i] = s.values.values[i].imag();
      base[2 * plane + i] = s.pilot_grid.values[i].real();
      base[3 * plane + i] = s.pilot_grid.values[i].imag();
    }
  }
  return Tensor({slots.size(), kInputChannels, m_n, n_n}, std::move(data));
}

Tensor make_labels(const std::vector<const ResourceGrid*>& slots, const GridConfig& grid) {
  const std::size_t bt = grid.bits_per_symbol(), rows = grid.data_symbols(), cols = grid.subcarriers;
  const std::size_t per = bt * rows * cols;
  std::vector<real> data(slots.size() * per);
  for (std::size_t b = 0; b < slots.size(); ++b) {
    const auto& bits = slots[b]->payload_bits;
    if (bits.size() != per) throw ShapeError("make_labels: payload size does not match the grid");
    real* base = data.data() + b * per;
    for (std::size_t m = 0; m < rows; ++m)
      for (std::size_t n = 0; n < cols; ++n)
        for (std::size_t l = 0; l < bt; ++l) base[(l * rows + m) * cols + n] = bits[(m * cols + n) * bt + l];
  }
  return Tensor({slots.size(), bt, rows, cols}, std::move(data));
}

std::vector<float> llr_from_probs(std::span<const real> probs) {
  std::vector<float> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(static_cast<double>(probs[i]), static_cast<double>(kProbClamp),
                                1.0 - static_cast<double>(kProbClamp));
    out[i] = static_cast<float>(std::log(p / (1.0 - p)));
  }
  return out;
}

std::vector<LayerDescriptor> layer_descriptors(const ModelConfig& c, const GridConfig& grid) {
  c.validate();
  const std::size_t m = grid.symbols, n = grid.subcarriers, f = c.filters, k = c.kernel;
  const std::size_t rows = grid.data_symbols(), steps = c.steps();
  const bool spiking = c.variant == Variant::Spiking;
  std::vector<LayerDescriptor> out;
  auto conv = [&](std::string name, std::size_t kernel, std::size_t cin, std::size_t cout, std::size_t h,
                  std::optional<std::string> gate, std::size_t repeats) {
    out.push_back({std::move(name), LayerKind::Conv, kernel, cin, cout, h, n, std::move(gate), repeats});
  };
  auto norm = [&](std::string name, std::optional<std::string> gate, std::size_t repeats) {
    out.push_back({std::move(name), LayerKind::Norm, 1, f, f, m, n, std::move(gate), repeats});
  };

  conv("input.conv", k, kInputChannels, f, m, std::nullopt, 1);
  for (std::size_t i = 0; i < c.blocks; ++i) {
    const std::string b = block_name(i);
    if (!spiking) {
      norm(b + ".norm1", std::nullopt, 1);
      conv(b + ".conv1", k, f, f, m, std::nullopt, 1);
      norm(b + ".norm2", std::nullopt, 1);
      conv(b + ".conv2", k, f, f, m, std::nullopt, 1);
    } else if (c.block == BlockKind::Sew) {
      const std::string in = i == 0 ? "input.lif" : block_name(i - 1) + ".out";
      conv(b + ".conv1", k, f, f, m, in, 1);
      norm(b + ".norm1", in, 1);
      conv(b + ".conv2", k, f, f, m, b + ".lif1", 1);
      norm(b + ".norm2", b + ".lif1", 1);
    } else {
      norm(b + ".norm1", std::nullopt, steps);
      conv(b + ".conv1", k, f, f, m, b + ".lif1", 1);
      norm(b + ".norm2", b + ".lif1", 1);
      conv(b + ".conv2", k, f, f, m, b + ".lif2", 1);
    }
  }
  conv("head.conv", 1, f, c.bits, rows, std::nullopt, steps);
  out.push_back({"head.sigmoid", LayerKind::Elementwise, 1, c.bits, c.bits, rows, n, std::nullopt, steps});
  if (steps > 1) out.push_back({"head.mean", LayerKind::Elementwise, 1, c.bits, c.bits, rows, n, std::nullopt, 1});
  return out;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
