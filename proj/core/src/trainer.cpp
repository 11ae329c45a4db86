#include "sprx/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "sprx/ops.hpp"

namespace sprx {
inline namespace SPRX_PRECISION_NS {

void AdamW::step(const ParamSet& params, double lr) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (const auto& [name, t] : params.entries()) {
    Tensor p = t;
    auto w = p.mutable_data();
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(w.size(), real(0));
      v.assign(w.size(), real(0));
    }
    const bool has_grad = p.has_grad();
    const auto g = has_grad ? p.grad() : std::span<const real>();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = has_grad ? static_cast<double>(g[i]) : 0.0;
      double wi = static_cast<double>(w[i]);
      wi -= lr * config_.weight_decay * wi;
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<real>(mi);
      v[i] = static_cast<real>(vi);
      wi -= lr * (mi / c1) / (std::sqrt(vi / c2) + config_.eps);
      w[i] = static_cast<real>(wi);
    }
  }
}

void AdamW::save(std::map<std::string, Tensor>& state) const {
  for (const auto& [name, m] : m_) state["adam.m/" + name] = Tensor({m.size()}, m);
  for (const auto& [name, v] : v_) state["adam.v/" + name] = Tensor({v.size()}, v);
}

void AdamW::load(const std::map<std::string, Tensor>& state, const ParamSet& params, std::size_t steps) {
  m_.clear();
  v_.clear();
  t_ = steps;
  if (steps == 0) return;
  for (const auto& [name, t] : params.entries()) {
    auto m = state.find("adam.m/" + name), v = state.find("adam.v/" + name);
    if (m == state.end() || v == state.end())
      throw std::invalid_argument("optimizer state missing for parameter '" + name + "'");
    if (m->second.numel() != t.numel() || v->second.numel() != t.numel())
      throw std::invalid_argument("optimizer state for '" + name + "' has the wrong size");
    m_[name].assign(m->second.data().begin(), m->second.data().end());
    v_[name].assign(v->second.data().begin(), v->second.data().end());
  }
}

std::string_view to_string(LrSchedule s) { return s == LrSchedule::Cosine ? "cosine" : "constant"; }

LrSchedule lr_schedule_from_string(std::string_view name) {
  if (name == "constant") return LrSchedule::Constant;
  if (name == "cosine") return LrSchedule::Cosine;
  throw std::invalid_argument("unknown learning-rate schedule '" + std::string(name) + "'");
}

double TrainConfig::lr_at(std::size_t index) const {
  if (lr_schedule == LrSchedule::Constant || steps == 0) return optimizer.lr;
  const double frac = std::min(1.0, static_cast<double>(index) / static_cast<double>(steps));
  return 0.5 * optimizer.lr * (1.0 + std::cos(std::numbers::pi * frac));
}

void TrainConfig::validate() const {
  grid.validate();
  ranges.validate();
  if (test_profiles.empty()) throw std::invalid_argument("test_profiles: at least one profile is required");
  for (const auto& p : test_profiles) {
    tdl_profile(p);
    if (std::find(ranges.profiles.begin(), ranges.profiles.end(), p) != ranges.profiles.end())
      throw std::invalid_argument("test_profiles: profile " + p + " is also a training profile");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (!(optimizer.lr >= 0.0)) throw std::invalid_argument("optimizer.lr must be non-negative");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0)) throw std::invalid_argument("optimizer.beta1 must lie in [0,1)");
  if (!(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) throw std::invalid_argument("optimizer.beta2 must lie in [0,1)");
  if (!(optimizer.eps > 0.0)) throw std::invalid_argument("optimizer.eps must be positive");
  if (!(optimizer.weight_decay >= 0.0)) throw std::invalid_argument("optimizer.weight_decay must be non-negative");
  if (qat) {
    QuantSpec::for_bits(qat->bits, real(1));
    if (qat->refresh == 0) throw std::invalid_argument("qat.refresh must be positive");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"grid", to_json(c.grid)},
                      {"profiles", c.ranges.profiles},
                      {"ebno_db", c.ranges.ebno_db},
                      {"delay_ns", c.ranges.delay_ns},
                      {"doppler_hz", c.ranges.doppler_hz},
                      {"test_profiles", c.test_profiles},
                      {"batch_size", c.batch_size},
                      {"steps", c.steps},
                      {"seed", c.seed},
                      {"optimizer",
                       {{"lr", c.optimizer.lr},
                        {"beta1", c.optimizer.beta1},
                        {"beta2", c.optimizer.beta2},
                        {"eps", c.optimizer.eps},
                        {"weight_decay", c.optimizer.weight_decay}}},
                      {"lr_schedule", std::string(to_string(c.lr_schedule))}};
  j["qat"] = c.qat ? nlohmann::json{{"bits", c.qat->bits}, {"refresh", c.qat->refresh}} : nlohmann::json(nullptr);
  return j;
}

namespace {

template <class F>
void for_keys(const nlohmann::json& j, const std::string& prefix, F&& f) {
  if (!j.is_object()) throw std::invalid_argument(prefix + ": expected an object");
  for (const auto& [key, v] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    try {
      if (!f(key, v)) throw std::invalid_argument("unknown key");
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      // Nested objects already carry their full path.
      if (what.rfind(path, 0) == 0) throw;
      throw std::invalid_argument(path + ": " + what);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(path + ": " + e.what());
    }
  }
}

}  // namespace

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  for_keys(j, "train", [&](const std::string& key, const nlohmann::json& v) {
    if (key == "grid") c.grid = grid_from_json(v);
    else if (key == "profiles") c.ranges.profiles = v.get<std::vector<std::string>>();
    else if (key == "ebno_db") c.ranges.ebno_db = v.get<std::array<double, 2>>();
    else if (key == "delay_ns") c.ranges.delay_ns = v.get<std::array<double, 2>>();
    else if (key == "doppler_hz") c.ranges.doppler_hz = v.get<std::array<double, 2>>();
    else if (key == "test_profiles") c.test_profiles = v.get<std::vector<std::string>>();
    else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "steps") c.steps = v.get<std::size_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "lr_schedule") c.lr_schedule = lr_schedule_from_string(v.get<std::string>());
    else if (key == "optimizer") {
      for_keys(v, "train.optimizer", [&](const std::string& k, const nlohmann::json& x) {
        if (k == "lr") c.optimizer.lr = x.get<double>();
        else if (k == "beta1") c.optimizer.beta1 = x.get<double>();
        else if (k == "beta2") c.optimizer.beta2 = x.get<double>();
        else if (k == "eps") c.optimizer.eps = x.get<double>();
        else if (k == "weight_decay") c.optimizer.weight_decay = x.get<double>();
        else return false;
        return true;
      });
    } else if (key == "qat") {
      if (v.is_null()) {
        c.qat.reset();
      } else {
        QatConfig q;
        for_keys(v, "train.qat", [&](const std::string& k, const nlohmann::json& x) {
          if (k == "bits") q.bits = x.get<unsigned>();
          else if (k == "refresh") q.refresh = x.get<std::size_t>();
          else return false;
          return true;
        });
        c.qat = q;
      }
    } else {
      return false;
    }
    return true;
  });
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("train.") + e.what());
  }
  return c;
}

Batch make_batch(std::vector<SlotSample> slots, const GridConfig& grid) {
  Batch b;
  b.slots = std::move(slots);
  std::vector<const ResourceGrid*> grids;
  for (const auto& s : b.slots) grids.push_back(&s.received);
  b.input = make_input(grids);
  b.labels = make_labels(grids, grid);
  return b;
}

Batch generate_batch(const GridConfig& grid, const LinkRanges& ranges, std::size_t size, Rng& rng) {
  std::vector<SlotSample> slots;
  slots.reserve(size);
  for (std::size_t i = 0; i < size; ++i) slots.push_back(draw_slot(grid, ranges, rng));
  return make_batch(std::move(slots), grid);
}

Trainer::Trainer(ModelConfig model, TrainConfig train)
    : model_(std::move(model)), train_(std::move(train)), optimizer_(train_.optimizer) {
  model_.validate();
  train_.validate();
  if (model_.bits != train_.grid.bits_per_symbol())
    throw std::invalid_argument("model.bits does not match the grid modulation");
  Rng rng(derive_seed(train_.seed, kInitStream));
  params_ = init_params(model_, rng);
}

Trainer::Trainer(ModelConfig model, TrainConfig train, const ParamSet& initial) : Trainer(std::move(model), std::move(train)) {
  const auto layout = param_layout(model_);
  for (const auto& [name, shape] : layout) {
    const Tensor& src = initial.at(name);
    if (src.shape() != shape) throw ShapeError("initial parameter '" + name + "' has shape " + to_string(src.shape()));
    auto dst = params_.at(name);
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  }
}

Trainer::Trainer(const Checkpoint& ckpt, TrainConfig train)
    : model_(ckpt.model), train_(std::move(train)), params_(ckpt.params), optimizer_(train_.optimizer) {
  train_.validate();
  const auto steps = ckpt.meta.value("step", std::size_t{0});
  optimizer_.load(ckpt.state, params_, steps);
  if (train_.qat && steps > 0) {
    for (const auto& [name, _] : params_.entries()) {
      auto it = ckpt.state.find("qat.scale/" + name);
      if (it == ckpt.state.end()) throw std::invalid_argument("quantizer scale missing for parameter '" + name + "'");
      scales_[name] = it->second.item();
    }
  }
}

void Trainer::refresh_scales() { scales_ = calibrate_scales(params_, train_.qat->bits); }

StepRecord Trainer::step() {
  const std::size_t index = optimizer_.steps();
  if (train_.qat && (index % train_.qat->refresh == 0 || scales_.empty())) refresh_scales();

  Rng rng(derive_seed(train_.seed, kTrainStream, index));
  const Batch batch = generate_batch(train_.grid, train_.ranges, train_.batch_size, rng);
  const ParamSet view = train_.qat ? fake_quantize_params(params_, scales_, train_.qat->bits) : params_;
  const ForwardResult out = forward(model_, view, train_.grid, batch.input, model_.variant == Variant::Spiking);
  const Tensor loss = bce_loss(out.probs, batch.labels);

  StepRecord rec;
  rec.step = index + 1;
  rec.loss = static_cast<double>(loss.item());
  rec.lr = train_.lr_at(index);
  if (!out.trace.empty()) rec.activation_percent = activation_probability(out.trace);
  if (!std::isfinite(rec.loss))
    throw NumericalError("non-finite training loss at step " + std::to_string(rec.step));

  for (const auto& [_, p] : params_.entries()) Tensor(p).zero_grad();
  backward(loss);
  optimizer_.step(params_, rec.lr);
  return rec;
}

ParamSet Trainer::deployed_params() const {
  ParamSet out;
  NoGradGuard guard;
  const ParamSet src = train_.qat ? fake_quantize_params(params_, scales_.empty() ? calibrate_scales(params_, train_.qat->bits) : scales_,
                                                         train_.qat->bits)
                                  : params_;
  for (const auto& [name, t] : src.entries()) out.add(name, Tensor(t.shape(), std::vector<real>(t.data().begin(), t.data().end())));
  return out;
}

Checkpoint Trainer::to_checkpoint() const {
  Checkpoint ck;
  ck.model = model_;
  ck.params = params_;
  ck.meta = {{"train", to_json(train_)}, {"step", optimizer_.steps()}};
  optimizer_.save(ck.state);
  for (const auto& [name, s] : scales_) ck.state["qat.scale/" + name] = Tensor::scalar(s);
  return ck;
}

}  // namespace SPRX_PRECISION_NS
}  // namespace sprx
