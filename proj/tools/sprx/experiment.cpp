#include "sprx/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace sprx::cli {

namespace {

using json = nlohmann::json;

/// Visits the keys of an object section, rejecting unknown ones.
template <class F>
void visit(const json& j, const std::string& path, F&& handle) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    bool known = false;
    try {
      known = handle(key, value, where);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    if (!known) throw ConfigError(where + ": unknown key");
  }
}

/// Splits a training section into model, stage-level and TrainConfig keys.
TrainStage parse_train(const json& j, const std::string& path, const GridConfig& grid, std::uint64_t seed,
                       const std::set<std::string>& extra_keys) {
  TrainStage st;
  json train = json::object();
  visit(j, path, [&](const std::string& key, const json& v, const std::string& where) {
    if (key == "model") {
      try {
        st.model = model_config_from_json(v);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path + "." + e.what());
      }
    } else if (key == "checkpoint_every") {
      st.checkpoint_every = v.get<std::size_t>();
      if (st.checkpoint_every == 0) throw ConfigError(where + ": must be positive");
    } else if (key == "grid" || key == "seed") {
      throw ConfigError(where + ": set at the top level of the experiment");
    } else if (extra_keys.count(key)) {
      // Handled by the caller.
    } else {
      train[key] = v;
    }
    return true;
  });
  train["grid"] = to_json(grid);
  train["seed"] = seed;
  try {
    st.train = train_config_from_json(train);
  } catch (const std::invalid_argument& e) {
    std::string what = e.what();
    if (what.rfind("train.", 0) == 0) what = what.substr(6);
    throw ConfigError(path + "." + what);
  }
  st.model.bits = grid.bits_per_symbol();
  return st;
}

json train_to_json(const TrainStage& st) {
  json j = to_json(st.train);
  j.erase("grid");
  j.erase("seed");
  j["model"] = to_json(st.model);
  j["checkpoint_every"] = st.checkpoint_every;
  return j;
}

void check_nonempty(const auto& v, const std::string& where) {
  if (v.empty()) throw ConfigError(where + ": must not be empty");
}

}  // namespace

ExperimentSpec parse_experiment(const json& j) {
  ExperimentSpec spec;
  if (!j.is_object()) throw ConfigError("experiment: expected an object");
  if (j.contains("seed")) {
    const json& seed = j["seed"];
    if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) throw ConfigError("seed: expected a non-negative integer");
    spec.seed = seed.get<std::uint64_t>();
  }
  if (j.contains("grid")) {
    try {
      spec.grid = grid_from_json(j["grid"]);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  visit(j, "", [&](const std::string& key, const json& v, const std::string& where) {
    if (key == "seed" || key == "grid") return true;
    if (key == "gen_data") {
      GenDataStage st;
      visit(v, where, [&](const std::string& k, const json& x, const std::string& w) {
        if (k == "name") st.name = x.get<std::string>();
        else if (k == "slots") st.slots = x.get<std::size_t>();
        else if (k == "profiles") st.ranges.profiles = x.get<std::vector<std::string>>();
        else if (k == "ebno_db") st.ranges.ebno_db = x.get<std::array<double, 2>>();
        else if (k == "delay_ns") st.ranges.delay_ns = x.get<std::array<double, 2>>();
        else if (k == "doppler_hz") st.ranges.doppler_hz = x.get<std::array<double, 2>>();
        else return false;
        (void)w;
        return true;
      });
      if (st.name.empty() || st.name.find('/') != std::string::npos)
        throw ConfigError(where + ".name: must be a plain file name");
      try {
        st.ranges.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(where + "." + e.what());
      }
      spec.gen_data = st;
    } else if (key == "train") {
      spec.train = parse_train(v, where, spec.grid, spec.seed, {});
    } else if (key == "eval") {
      EvalStage st;
      visit(v, where, [&](const std::string& k, const json& x, const std::string&) {
        if (k == "checkpoints") st.checkpoints = x.get<std::map<std::string, std::string>>();
        else if (k == "ebno_db") st.ebno_db = x.get<std::vector<double>>();
        else if (k == "doppler_hz") st.doppler_hz = x.get<std::vector<double>>();
        else if (k == "delay_ns") st.delay_ns = x.get<std::vector<double>>();
        else if (k == "profiles") st.profiles = x.get<std::vector<std::string>>();
        else if (k == "slots") st.slots = x.get<std::size_t>();
        else if (k == "baselines") st.baselines = x.get<bool>();
        else return false;
        return true;
      });
      check_nonempty(st.ebno_db, where + ".ebno_db");
      check_nonempty(st.doppler_hz, where + ".doppler_hz");
      check_nonempty(st.delay_ns, where + ".delay_ns");
      check_nonempty(st.profiles, where + ".profiles");
      for (double d : st.doppler_hz)
        if (d < 0 || d > 500) throw ConfigError(where + ".doppler_hz: must lie in [0, 500]");
      for (double d : st.delay_ns)
        if (d < 10 || d > 300) throw ConfigError(where + ".delay_ns: must lie in [10, 300]");
      for (const auto& p : st.profiles) {
        try {
          tdl_profile(p);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(where + ".profiles: " + e.what());
        }
      }
      for (const auto& [id, _] : st.checkpoints)
        if (id == "ls" || id == "genie") throw ConfigError(where + ".checkpoints: '" + id + "' is a reserved name");
      if (st.slots == 0) throw ConfigError(where + ".slots: must be positive");
      spec.eval = st;
    } else if (key == "quantize") {
      QuantizeStage st;
      visit(v, where, [&](const std::string& k, const json& x, const std::string&) {
        if (k == "checkpoint") st.checkpoint = x.get<std::string>();
        else if (k == "bits") st.bits = x.get<unsigned>();
        else return false;
        return true;
      });
      if (st.bits < 2 || st.bits > 16) throw ConfigError(where + ".bits: must lie in [2, 16]");
      spec.quantize = st;
    } else if (key == "energy") {
      EnergyStage st;
      visit(v, where, [&](const std::string& k, const json& x, const std::string&) {
        if (k == "checkpoint") st.checkpoint = x.get<std::string>();
        else if (k == "time_steps") st.time_steps = x.get<std::vector<std::size_t>>();
        else if (k == "bits") st.bits = x.get<std::vector<unsigned>>();
        else if (k == "slots") st.slots = x.get<std::size_t>();
        else if (k == "ebno_db") st.point.ebno_db = x.get<double>();
        else if (k == "doppler_hz") st.point.doppler_hz = x.get<double>();
        else if (k == "delay_ns") st.point.delay_ns = x.get<double>();
        else if (k == "profiles") st.profiles = x.get<std::vector<std::string>>();
        else return false;
        return true;
      });
      check_nonempty(st.time_steps, where + ".time_steps");
      check_nonempty(st.bits, where + ".bits");
      for (auto t : st.time_steps)
        if (t == 0) throw ConfigError(where + ".time_steps: must be positive");
      for (auto b : st.bits)
        if (b == 0 || b > 32) throw ConfigError(where + ".bits: must lie in [1, 32]");
      if (st.slots == 0) throw ConfigError(where + ".slots: must be positive");
      spec.energy = st;
    } else if (key == "ablate") {
      AblateStage st;
      const std::set<std::string> extra{"seeds", "validation_slots", "time_steps", "blocks"};
      st.base = parse_train(v, where, spec.grid, spec.seed, extra);
      for (const auto& k : extra) {
        if (!v.contains(k)) continue;
        try {
          if (k == "seeds") st.seeds = v[k].get<std::vector<std::uint64_t>>();
          else if (k == "validation_slots") st.validation_slots = v[k].get<std::size_t>();
          else if (k == "time_steps") st.time_steps = v[k].get<std::vector<std::size_t>>();
          else st.blocks = v[k].get<std::vector<std::size_t>>();
        } catch (const std::exception& e) {
          throw ConfigError(where + "." + k + ": " + e.what());
        }
      }
      check_nonempty(st.seeds, where + ".seeds");
      if (st.validation_slots == 0) throw ConfigError(where + ".validation_slots: must be positive");
      spec.ablate = st;
    } else {
      return false;
    }
    return true;
  });
  return spec;
}

ExperimentSpec load_experiment(const std::string& path, std::optional<std::uint64_t> seed) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (seed && j.is_object()) j["seed"] = *seed;
  return parse_experiment(j);
}

json to_json(const ExperimentSpec& spec) {
  json j = {{"seed", spec.seed}, {"grid", to_json(spec.grid)}};
  if (spec.gen_data) {
    const auto& s = *spec.gen_data;
    j["gen_data"] = {{"name", s.name},
                     {"slots", s.slots},
                     {"profiles", s.ranges.profiles},
                     {"ebno_db", s.ranges.ebno_db},
                     {"delay_ns", s.ranges.delay_ns},
                     {"doppler_hz", s.ranges.doppler_hz}};
  }
  if (spec.train) j["train"] = train_to_json(*spec.train);
  if (spec.eval) {
    const auto& s = *spec.eval;
    j["eval"] = {{"checkpoints", s.checkpoints}, {"ebno_db", s.ebno_db},   {"doppler_hz", s.doppler_hz},
                 {"delay_ns", s.delay_ns},       {"profiles", s.profiles}, {"slots", s.slots},
                 {"baselines", s.baselines}};
  }
  if (spec.quantize) j["quantize"] = {{"checkpoint", spec.quantize->checkpoint}, {"bits", spec.quantize->bits}};
  if (spec.energy) {
    const auto& s = *spec.energy;
    j["energy"] = {{"checkpoint", s.checkpoint}, {"time_steps", s.time_steps},       {"bits", s.bits},
                   {"slots", s.slots},           {"ebno_db", s.point.ebno_db},       {"doppler_hz", s.point.doppler_hz},
                   {"delay_ns", s.point.delay_ns}, {"profiles", s.profiles}};
  }
  if (spec.ablate) {
    const auto& s = *spec.ablate;
    json a = train_to_json(s.base);
    a["seeds"] = s.seeds;
    a["validation_slots"] = s.validation_slots;
    a["time_steps"] = s.time_steps;
    a["blocks"] = s.blocks;
    j["ablate"] = a;
  }
  return j;
}

json stage_json(const ExperimentSpec& spec, const std::string& stage) {
  const json all = to_json(spec);
  return {{"stage", stage}, {"seed", spec.seed}, {"grid", all["grid"]}, {"config", all.value(stage, json())}};
}

std::string content_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double speed_to_doppler(double speed_kmh, double carrier_hz) {
  return speed_kmh / 3.6 * carrier_hz / 299792458.0;
}

}  // namespace sprx::cli
