#include "sprx/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "sprx/checkpoint.hpp"
#include "sprx/experiment.hpp"
#include "sprx/quant.hpp"

namespace sprx::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path stage_dir(const Options& opts, const std::string& stage, const json& identity) {
  fs::path dir = fs::path(opts.out) / (stage + "-" + content_hash(identity));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw std::runtime_error("failed to write " + path.string());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

/// Runs fn(0..n-1) on up to `threads` workers. Results must be written by
/// index so the outcome does not depend on scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::size_t next = 0;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard lock(mu);
          if (next >= n) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

unsigned worker_count(const Options& opts) { return opts.deterministic ? 1u : std::max(1u, opts.threads); }

/// Weights used for inference: stored quantized weights as-is, QAT runs
/// through their final fake-quantization, float runs unchanged.
ParamSet receiver_params(const Checkpoint& ck) {
  const bool qat = ck.meta.contains("train") && ck.meta["train"].contains("qat") && !ck.meta["train"]["qat"].is_null();
  if (!ck.meta.contains("quantized") && qat && ck.state.count("qat.scale/" + ck.params.entries().front().first)) {
    ScaleMap scales;
    for (const auto& [name, _] : ck.params.entries()) scales[name] = ck.state.at("qat.scale/" + name).item();
    const unsigned bits = ck.meta["train"]["qat"]["bits"].get<unsigned>();
    NoGradGuard guard;
    ParamSet q = fake_quantize_params(ck.params, scales, bits);
    ParamSet out;
    for (const auto& [name, t] : q.entries()) out.add(name, t.detach());
    return out;
  }
  ParamSet out;
  for (const auto& [name, t] : ck.params.entries()) out.add(name, t.detach());
  return out;
}

Checkpoint load_or_fail(const std::string& path) {
  if (path.empty()) throw ConfigError("no checkpoint given (set it in the config or pass --checkpoint)");
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const ExperimentSpec& spec, const Options& opts, std::ostream& log) {
  if (!spec.gen_data) throw ConfigError("gen_data: section missing from config");
  const auto& st = *spec.gen_data;
  const fs::path dir = stage_dir(opts, "gen-data", stage_json(spec, "gen_data"));
  Dataset d;
  d.grid = spec.grid;
  d.profiles = st.ranges.profiles;
  d.slots.reserve(st.slots);
  for (std::size_t i = 0; i < st.slots; ++i) {
    Rng rng(derive_seed(spec.seed, 0x6461, i));
    d.slots.push_back(draw_slot(spec.grid, st.ranges, rng));
  }
  write_dataset(dir / st.name, d);
  log << "wrote " << st.slots << " slots to " << (dir / st.name).string() << ".{bin,json}\n";
  return kOk;
}

int cmd_train(const ExperimentSpec& spec, const Options& opts, std::ostream& log) {
  if (!spec.train) throw ConfigError("train: section missing from config");
  const auto& st = *spec.train;
  const fs::path dir = stage_dir(opts, "train", stage_json(spec, "train"));
  const fs::path ckpt_path = dir / "checkpoint.bin", log_path = dir / "train.jsonl";

  std::optional<Trainer> trainer;
  std::vector<std::string> lines;
  if (opts.resume) {
    if (!fs::exists(ckpt_path)) throw ConfigError("--resume: no checkpoint at " + ckpt_path.string());
    Checkpoint ck;
    try {
      ck = load_checkpoint(ckpt_path, st.model);
    } catch (const CheckpointError& e) {
      throw ConfigError(std::string("--resume: ") + e.what());
    }
    if (ck.meta.value("train", json()) != to_json(st.train))
      throw ConfigError("--resume: checkpoint was trained with a different train configuration");
    trainer.emplace(ck, st.train);
    std::ifstream is(log_path);
    for (std::string line; lines.size() < trainer->steps_done() && std::getline(is, line);) lines.push_back(line);
    if (lines.size() != trainer->steps_done()) throw ConfigError("--resume: training log is shorter than the checkpoint");
    log << "resuming at step " << trainer->steps_done() << '\n';
  } else {
    trainer.emplace(st.model, st.train);
  }

  std::ofstream out(log_path, std::ios::binary | std::ios::trunc);
  for (const auto& l : lines) out << l << '\n';

  const std::size_t target = std::min(st.train.steps, opts.stop_at.value_or(st.train.steps));
  while (trainer->steps_done() < target) {
    StepRecord rec;
    try {
      rec = trainer->step();
    } catch (const NumericalError& e) {
      out.flush();
      log << "numerical failure: " << e.what() << "; last good checkpoint kept at " << ckpt_path.string() << '\n';
      return kNumericalFailure;
    }
    json line = {{"step", rec.step}, {"loss", rec.loss}, {"lr", rec.lr}};
    line["activation_percent"] = rec.activation_percent ? json(*rec.activation_percent) : json(nullptr);
    out << line.dump() << '\n';
    if (rec.step % st.checkpoint_every == 0 || rec.step == target) {
      out.flush();
      save_checkpoint(ckpt_path, trainer->to_checkpoint());
    }
    if (rec.step % 1000 == 0) log << "step " << rec.step << " loss " << rec.loss << '\n';
  }
  if (!fs::exists(ckpt_path)) save_checkpoint(ckpt_path, trainer->to_checkpoint());
  log << "checkpoint: " << ckpt_path.string() << '\n';
  return kOk;
}

int cmd_eval(ExperimentSpec spec, const Options& opts, std::ostream& log) {
  if (!spec.eval) throw ConfigError("eval: section missing from config");
  auto& st = *spec.eval;
  for (const auto& c : opts.checkpoints) {
    const auto eq = c.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--checkpoint for eval must be id=path, got '" + c + "'");
    const std::string id = c.substr(0, eq);
    if (id == "ls" || id == "genie") throw ConfigError("--checkpoint: '" + id + "' is a reserved name");
    st.checkpoints[id] = c.substr(eq + 1);
  }
  const fs::path dir = stage_dir(opts, "eval", stage_json(spec, "eval"));

  std::vector<ModelReceiver> models;
  for (const auto& [id, path] : st.checkpoints) {
    const Checkpoint ck = load_or_fail(path);
    if (ck.model.bits != spec.grid.bits_per_symbol())
      throw ConfigError("eval.checkpoints." + id + ": model bits do not match the grid modulation");
    models.push_back({id, ck.model, receiver_params(ck)});
  }

  std::vector<SweepPoint> points;
  for (double e : st.ebno_db)
    for (double d : st.doppler_hz)
      for (double tau : st.delay_ns) points.push_back({e, d, tau});

  std::vector<std::vector<ReceiverMetrics>> results(points.size());
  parallel_for(points.size(), worker_count(opts), [&](std::size_t p) {
    const auto slots = draw_sweep_slots(spec.grid, st.profiles, points[p], st.slots, derive_seed(spec.seed, 0xe7a1, p));
    results[p] = evaluate_slots(slots, spec.grid, models, st.baselines);
  });

  std::ostringstream csv;
  csv << "ebno_db,doppler_hz,delay_ns,receiver,ber,bce,slots\n";
  json spikes = json::array();
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (const auto& m : results[p]) {
      csv << fmt("%g", points[p].ebno_db) << ',' << fmt("%g", points[p].doppler_hz) << ','
          << fmt("%g", points[p].delay_ns) << ',' << m.receiver << ',' << fmt("%.6e", m.ber) << ','
          << fmt("%.6f", m.bce) << ',' << m.slots << '\n';
      if (!m.trace.empty()) {
        json sites = json::object();
        for (const auto& s : m.trace.sites) sites[s.name] = spiking_rate(s);
        spikes.push_back({{"ebno_db", points[p].ebno_db},
                          {"doppler_hz", points[p].doppler_hz},
                          {"delay_ns", points[p].delay_ns},
                          {"receiver", m.receiver},
                          {"activation_percent", activation_probability(m.trace)},
                          {"spike_rates", sites}});
      }
    }
  }
  write_text(dir / "eval.csv", csv.str());
  write_text(dir / "spikes.json", spikes.dump(2) + "\n");
  log << "wrote " << (dir / "eval.csv").string() << '\n';
  return kOk;
}

int cmd_quantize(ExperimentSpec spec, const Options& opts, std::ostream& log) {
  if (!spec.quantize) throw ConfigError("quantize: section missing from config");
  auto& st = *spec.quantize;
  if (!opts.checkpoints.empty()) st.checkpoint = opts.checkpoints.front();
  const fs::path dir = stage_dir(opts, "quantize", stage_json(spec, "quantize"));
  const Checkpoint src = load_or_fail(st.checkpoint);
  if (src.meta.contains("quantized")) throw ConfigError("quantize: checkpoint is already quantized");

  const json qat = src.meta.contains("train") ? src.meta["train"].value("qat", json()) : json();
  Checkpoint out;
  out.model = src.model;
  ScaleMap scales;
  std::string method;
  unsigned bits = st.bits;
  if (!qat.is_null()) {
    method = "qat";
    bits = qat.at("bits").get<unsigned>();
    if (bits != st.bits) throw ConfigError("quantize.bits: checkpoint was trained with " + std::to_string(bits) + "-bit QAT");
    out.params = receiver_params(src);
    for (const auto& [name, _] : src.params.entries()) scales[name] = src.state.at("qat.scale/" + name).item();
  } else {
    method = "ptq";
    std::tie(out.params, scales) = post_training_quantize(src.params, bits);
  }
  json scale_json = json::object();
  for (const auto& [name, s] : scales) {
    scale_json[name] = s;
    out.state["qat.scale/" + name] = Tensor::scalar(s);
    if (!on_grid(out.params.at(name), QuantSpec::for_bits(bits, s)))
      throw NumericalError("quantized parameter '" + name + "' is off the quantization grid");
  }
  out.meta = {{"quantized", {{"bits", bits}, {"method", method}}}, {"source_meta", src.meta}};
  save_checkpoint(dir / "quantized.bin", out);
  write_text(dir / "scales.json", json{{"bits", bits}, {"method", method}, {"scales", scale_json}}.dump(2) + "\n");
  log << method << " " << bits << "-bit checkpoint: " << (dir / "quantized.bin").string() << '\n';
  return kOk;
}

int cmd_energy(ExperimentSpec spec, const Options& opts, std::ostream& log) {
  if (!spec.energy) throw ConfigError("energy: section missing from config");
  auto& st = *spec.energy;
  if (!opts.checkpoints.empty()) st.checkpoint = opts.checkpoints.front();
  const fs::path dir = stage_dir(opts, "energy", stage_json(spec, "energy"));
  const Checkpoint ck = load_or_fail(st.checkpoint);
  if (ck.model.variant != Variant::Spiking) throw ConfigError("energy: checkpoint must hold a spiking model");
  const ParamSet params = receiver_params(ck);
  const auto slots = draw_sweep_slots(spec.grid, st.profiles, st.point, st.slots, derive_seed(spec.seed, 0xe1e7));

  ModelConfig ann = ck.model;
  ann.variant = Variant::Neural;
  const EnergyTable table;
  json reports = json::array();
  std::ostringstream text, csv;
  csv << "time_steps,bits,";
  bool header_done = false;
  for (std::size_t t : st.time_steps) {
    ModelConfig cfg = ck.model;
    cfg.time_steps = t;
    const auto metrics = evaluate_slots(slots, spec.grid, {{"spiking", cfg, params}}, false);
    const SpikeTrace& trace = metrics.front().trace;
    for (unsigned bits : st.bits) {
      const EnergyReport r = energy(layer_descriptors(cfg, spec.grid), trace, table, bits);
      const double ann_pj = energy(layer_descriptors(ann, spec.grid), {}, table, bits).ann_total_pj;
      reports.push_back({{"time_steps", t},
                         {"bits", bits},
                         {"report", r.to_json()},
                         {"ann_reference_pj", ann_pj},
                         {"ann_to_snn_ratio", ann_pj / r.snn_total_pj},
                         {"ber", metrics.front().ber}});
      text << "T=" << t << ", " << bits << "-bit\n" << r.to_table();
      text << "reference ANN energy: " << fmt("%.1f", ann_pj) << " pJ, ANN/SNN " << fmt("%.3f", ann_pj / r.snn_total_pj)
           << "\n\n";
      std::istringstream rows(r.to_csv());
      std::string line;
      std::getline(rows, line);
      if (!header_done) {
        csv << line << '\n';
        header_done = true;
      }
      while (std::getline(rows, line)) csv << t << ',' << bits << ',' << line << '\n';
    }
  }
  write_text(dir / "energy.json", json{{"reports", reports}}.dump(2) + "\n");
  write_text(dir / "energy.txt", text.str());
  write_text(dir / "energy.csv", csv.str());
  log << text.str();
  return kOk;
}

int cmd_ablate(const ExperimentSpec& spec, const Options& opts, std::ostream& log) {
  if (!spec.ablate) throw ConfigError("ablate: section missing from config");
  const auto& st = *spec.ablate;
  const std::string& axis = opts.axis;

  std::vector<std::pair<std::string, ModelConfig>> variants;
  ModelConfig base = st.base.model;
  if (axis == "time-steps") {
    for (auto t : st.time_steps) {
      ModelConfig c = base;
      c.time_steps = t;
      variants.emplace_back(std::to_string(t), c);
    }
  } else if (axis == "combine-op") {
    for (Combine op : {Combine::Add, Combine::And, Combine::IAnd}) {
      ModelConfig c = base;
      c.combine = op;
      variants.emplace_back(std::string(to_string(op)), c);
    }
  } else if (axis == "surrogate") {
    for (SurrogateKind k : {SurrogateKind::ArcTan, SurrogateKind::FastSigmoid, SurrogateKind::Sigmoid}) {
      ModelConfig c = base;
      c.lif.surrogate = k;
      variants.emplace_back(std::string(to_string(k)), c);
    }
  } else if (axis == "blocks") {
    for (auto b : st.blocks) {
      ModelConfig c = base;
      c.blocks = b;
      variants.emplace_back(std::to_string(b), c);
    }
  } else {
    throw ConfigError("--axis: unknown ablation axis '" + axis + "' (time-steps, combine-op, surrogate, blocks)");
  }
  for (auto& [_, c] : variants) c.validate();

  json identity = stage_json(spec, "ablate");
  identity["axis"] = axis;
  const fs::path dir = stage_dir(opts, "ablate", identity);

  LinkRanges val_ranges = st.base.train.ranges;
  val_ranges.profiles = st.base.train.test_profiles;
  std::vector<SlotSample> val;
  for (std::size_t i = 0; i < st.validation_slots; ++i) {
    Rng rng(derive_seed(spec.seed, 0xab1a, i));
    val.push_back(draw_slot(spec.grid, val_ranges, rng));
  }

  struct Run {
    std::string value;
    std::uint64_t seed;
    double final_loss = 0;
    ReceiverMetrics metrics;
    std::optional<EnergyReport> energy;
    bool failed = false;
  };
  std::vector<Run> runs;
  for (const auto& [value, _] : variants)
    for (auto s : st.seeds) runs.push_back({value, s, 0, {}, std::nullopt, false});

  parallel_for(runs.size(), worker_count(opts), [&](std::size_t i) {
    Run& run = runs[i];
    const ModelConfig& cfg = variants[i / st.seeds.size()].second;
    TrainConfig tc = st.base.train;
    tc.seed = run.seed;
    Trainer trainer(cfg, tc);
    std::vector<double> losses;
    try {
      while (trainer.steps_done() < tc.steps) losses.push_back(trainer.step().loss);
    } catch (const NumericalError&) {
      run.failed = true;
      return;
    }
    const std::size_t window = std::min<std::size_t>(100, losses.size());
    for (std::size_t k = losses.size() - window; k < losses.size(); ++k) run.final_loss += losses[k] / window;
    run.metrics = evaluate_slots(val, spec.grid, {{"model", cfg, trainer.deployed_params()}}, false).front();
    if (cfg.variant == Variant::Spiking)
      run.energy = energy(layer_descriptors(cfg, spec.grid), run.metrics.trace, EnergyTable{}, 32);
  });

  std::ostringstream csv;
  csv << "axis,value,seed,final_loss,val_bce,val_ber,activation_percent,snn_pj,ann_pj\n";
  json report = json::array();
  bool any_failed = false;
  for (const auto& r : runs) {
    if (r.failed) {
      any_failed = true;
      csv << axis << ',' << r.value << ',' << r.seed << ",nan,nan,nan,,,\n";
      continue;
    }
    csv << axis << ',' << r.value << ',' << r.seed << ',' << fmt("%.6f", r.final_loss) << ','
        << fmt("%.6f", r.metrics.bce) << ',' << fmt("%.6e", r.metrics.ber) << ',';
    if (r.energy) {
      csv << fmt("%.4f", *r.energy->activation_percent) << ',' << fmt("%.1f", r.energy->snn_total_pj) << ','
          << fmt("%.1f", r.energy->ann_total_pj);
      json sites = json::object();
      for (const auto& s : r.metrics.trace.sites) sites[s.name] = spiking_rate(s);
      report.push_back({{"value", r.value}, {"seed", r.seed}, {"spike_rates", sites}, {"energy", r.energy->to_json()}});
    } else {
      csv << ",,";
    }
    csv << '\n';
  }
  write_text(dir / "ablate.csv", csv.str());
  write_text(dir / "spikes.json", report.dump(2) + "\n");
  log << csv.str();
  return any_failed ? kNumericalFailure : kOk;
}

}  // namespace

std::optional<std::uint64_t> effective_seed(const Options& opts) {
  if (opts.seed) return opts.seed;
  if (const char* env = std::getenv("SPRX_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(std::string("SPRX_SEED: not an unsigned integer: '") + env + "'");
    }
  }
  return std::nullopt;
}

int run_stage(const std::string& stage, const Options& opts, std::ostream& log) {
  try {
    if (opts.config.empty()) throw ConfigError("--config is required");
    const ExperimentSpec spec = load_experiment(opts.config, effective_seed(opts));
    if (stage == "gen-data") return cmd_gen_data(spec, opts, log);
    if (stage == "train") return cmd_train(spec, opts, log);
    if (stage == "eval") return cmd_eval(spec, opts, log);
    if (stage == "quantize") return cmd_quantize(spec, opts, log);
    if (stage == "energy") return cmd_energy(spec, opts, log);
    if (stage == "ablate") return cmd_ablate(spec, opts, log);
    throw ConfigError("unknown command '" + stage + "'");
  } catch (const NumericalError& e) {
    log << "error: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

}  // namespace sprx::cli
