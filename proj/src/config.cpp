#include "iossnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace iossnet {

using nlohmann::json;

namespace {

// Reads an object while tracking which keys were consumed.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void read(const std::string& key, T& out) {
    const json* v = get(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("field '" + where(key) + "' has the wrong type");
    }
  }

  void read_number(const std::string& key, double& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_number()) throw ConfigError("field '" + where(key) + "' must be a number");
    out = v->get<double>();
  }

  void read_interval(const std::string& key, Box& box, Index dim) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
      throw ConfigError("field '" + where(key) + "' must be [lower, upper]");
    }
    const double lo = (*v)[0].get<double>(), hi = (*v)[1].get<double>();
    if (!(lo <= hi)) throw ConfigError("field '" + where(key) + "' has lower > upper");
    box = Box::uniform(dim, lo, hi);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown field '" + where(it.key()) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json interval(const Box& b) { return json::array({b.lower[0], b.upper[0]}); }

}  // namespace

MValue MValue::parse(const std::string& s) {
  if (s == "inf") return {true, 0};
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used == s.size() && v >= 1) return {false, static_cast<Index>(v)};
  } catch (const std::exception&) {
  }
  throw ConfigError("invalid M value '" + s + "' (positive integer or \"inf\")");
}

std::string to_string(GainMode m) { return m == GainMode::optimal ? "optimal" : "conservative"; }

GainMode gain_mode_from_string(const std::string& s) {
  if (s == "optimal") return GainMode::optimal;
  if (s == "conservative") return GainMode::conservative;
  throw ConfigError("unknown gain mode '" + s + "'");
}

void RunConfig::validate() const {
  if (model != "train" && model != "scalar") throw ConfigError("unknown model '" + model + "'");
  if (M.empty()) throw ConfigError("field 'M' must list at least one size");
  for (const auto& m : M) {
    if (!m.infinite && model == "train" && m.value < 2) throw ConfigError("field 'M': the train needs M >= 2");
    if (!m.infinite && m.value < 1) throw ConfigError("field 'M': sizes must be positive");
  }
  if (grid < 1) throw ConfigError("field 'grid' must be >= 1");
  if (eta_sweep.empty()) throw ConfigError("field 'eta_sweep' must not be empty");
  for (double e : eta_sweep) {
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("field 'eta_sweep': values must lie in (0, 1)");
  }
  if (!(margin >= 0.0)) throw ConfigError("field 'margin' must be >= 0");
  if (budget < 1) throw ConfigError("field 'budget' must be >= 1");
  if (samples < 0) throw ConfigError("field 'falsify.samples' must be >= 0");
  if (sampler.horizon < 1) throw ConfigError("field 'falsify.horizon' must be >= 1");
  if (!(sampler.initial_fraction > 0.0 && sampler.initial_fraction <= 1.0)) {
    throw ConfigError("field 'falsify.initial_fraction' must lie in (0, 1]");
  }
  if (threads < 0) throw ConfigError("field 'threads' must be >= 0");
  try {
    if (model == "train") train.validate();
  } catch (const SpecificationError& e) {
    throw ConfigError(std::string("field 'params': ") + e.what());
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  Fields top(j, "");
  top.read("model", cfg.model);
  if (const json* p = top.get("params")) {
    Fields f(*p, "params");
    if (cfg.model == "train") {
      auto& t = cfg.train;
      f.read_number("delta", t.delta);
      f.read_number("mass", t.mass);
      f.read_number("spring", t.spring);
      f.read_number("damping", t.damping);
      f.read_interval("velocity", t.velocity_box, 1);
      f.read_interval("force", t.force_box, 1);
      f.read_interval("position", t.position_box, 1);
      f.read_interval("disturbance", t.disturbance_box, 3);
    } else if (cfg.model == "scalar") {
      auto& s = cfg.scalar;
      f.read_number("a", s.a);
      f.read_number("b", s.b);
      f.read_number("c", s.c);
      f.read_number("d", s.d);
      f.read_number("coupling", s.coupling);
      f.read_interval("state", s.state_box, 1);
      f.read_interval("disturbance", s.disturbance_box, 1);
    }
    f.finish();
  }
  if (const json* m = top.get("M")) {
    const json list = m->is_array() ? *m : json::array({*m});
    cfg.M.clear();
    for (const auto& v : list) {
      if (v.is_number_integer()) {
        cfg.M.push_back(MValue::parse(std::to_string(v.get<long>())));
      } else if (v.is_string()) {
        cfg.M.push_back(MValue::parse(v.get<std::string>()));
      } else {
        throw ConfigError("field 'M' entries must be integers or \"inf\"");
      }
    }
  }
  top.read("grid", cfg.grid);
  top.read("eta_sweep", cfg.eta_sweep);
  top.read_number("margin", cfg.margin);
  top.read("budget", cfg.budget);
  std::string mode = to_string(cfg.gain_mode);
  top.read("gain_mode", mode);
  cfg.gain_mode = gain_mode_from_string(mode);
  if (const json* p = top.get("falsify")) {
    Fields f(*p, "falsify");
    f.read("samples", cfg.samples);
    f.read("horizon", cfg.sampler.horizon);
    f.read_number("initial_fraction", cfg.sampler.initial_fraction);
    f.read("ascent_steps", cfg.sampler.ascent_steps);
    f.read("max_attempts", cfg.sampler.max_attempts);
    std::string sm = to_string(cfg.sampler.mode);
    f.read("mode", sm);
    try {
      cfg.sampler.mode = sampler_mode_from_string(sm);
    } catch (const SpecificationError& e) {
      throw ConfigError(std::string("field 'falsify.mode': ") + e.what());
    }
    f.finish();
  }
  top.read("seed", cfg.seed);
  top.read("threads", cfg.threads);
  top.read("out", cfg.out);
  top.finish();
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
    throw ConfigError("config syntax error at line " + std::to_string(line) + ": " + e.what());
  }
  return config_from_json(j);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["model"] = cfg.model;
  if (cfg.model == "train") {
    const auto& t = cfg.train;
    j["params"] = {{"delta", t.delta},
                   {"mass", t.mass},
                   {"spring", t.spring},
                   {"damping", t.damping},
                   {"velocity", interval(t.velocity_box)},
                   {"force", interval(t.force_box)},
                   {"position", interval(t.position_box)},
                   {"disturbance", interval(t.disturbance_box)}};
  } else {
    const auto& s = cfg.scalar;
    j["params"] = {{"a", s.a},         {"b", s.b}, {"c", s.c}, {"d", s.d}, {"coupling", s.coupling},
                   {"state", interval(s.state_box)}, {"disturbance", interval(s.disturbance_box)}};
  }
  json ms = json::array();
  for (const auto& m : cfg.M) {
    if (m.infinite) {
      ms.push_back("inf");
    } else {
      ms.push_back(m.value);
    }
  }
  j["M"] = ms;
  j["grid"] = cfg.grid;
  j["eta_sweep"] = cfg.eta_sweep;
  j["margin"] = cfg.margin;
  j["budget"] = cfg.budget;
  j["gain_mode"] = to_string(cfg.gain_mode);
  j["falsify"] = {{"samples", cfg.samples},
                  {"horizon", cfg.sampler.horizon},
                  {"initial_fraction", cfg.sampler.initial_fraction},
                  {"ascent_steps", cfg.sampler.ascent_steps},
                  {"max_attempts", cfg.sampler.max_attempts},
                  {"mode", to_string(cfg.sampler.mode)}};
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  j["out"] = cfg.out;
  return j;
}

std::vector<SubsystemClass> model_classes(const RunConfig& cfg) {
  if (cfg.model == "train") return {make_train_boundary_class(cfg.train), make_train_interior_class(cfg.train)};
  if (cfg.model == "scalar") {
    return {make_scalar_class(cfg.scalar, 0, "scalar"), make_scalar_class(cfg.scalar, 1, "scalar_end"),
            make_scalar_class(cfg.scalar, 2, "scalar_mid")};
  }
  throw ConfigError("unknown model '" + cfg.model + "'");
}

NetworkSpec build_network(const RunConfig& cfg, Index M) {
  if (cfg.model == "train") return make_train_network(M, cfg.train);
  if (cfg.model == "scalar") return make_scalar_network(M, cfg.scalar);
  throw ConfigError("unknown model '" + cfg.model + "'");
}

bool model_is_uniform(const RunConfig& cfg) { return cfg.model == "train" || cfg.model == "scalar"; }

}  // namespace iossnet
