#pragma once

// Experiment configuration. Keys are flat dotted names; nested JSON objects
// are flattened on load ({"env": {"name": ...}} is "env.name"). Any key not
// in the default table is rejected.

#include "mamt/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

namespace mamt::harness {

using json = nlohmann::json;

enum class Algorithm { Mamd, Mamt, Baseline, MamdOp };

inline Algorithm parse_algorithm(const std::string& s) {
  if (s == "mamd") return Algorithm::Mamd;
  if (s == "mamt") return Algorithm::Mamt;
  if (s == "baseline") return Algorithm::Baseline;
  if (s == "mamd-op") return Algorithm::MamdOp;
  throw ConfigError("unknown algorithm '" + s + "' (expected mamd | mamt | baseline | mamd-op)");
}

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Mamd: return "mamd";
    case Algorithm::Mamt: return "mamt";
    case Algorithm::Baseline: return "baseline";
    case Algorithm::MamdOp: return "mamd-op";
  }
  return "?";
}

/// Reads a number that may be written as the string "inf".
inline double number_or_inf(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
    return std::numeric_limits<double>::infinity();
  throw ConfigError("config key '" + key + "' must be a number or \"inf\"");
}

inline json number_to_json(double v) {
  if (std::isinf(v) && v > 0) return "inf";
  return v;
}

struct RunSettings {
  Algorithm algorithm = Algorithm::Mamd;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;

  std::string env_name;
  int horizon = 25;
  int n_parallel = 12;
  int spread_agents = 2;

  long step_size = 50000;
  int epochs_per_step = 4;
  int steps_per_update = 100;
  long buffer_size = 1000000;
  int batch_size = 1024;
  int heads = 4;
  int hidden = 128;
  double discount = 0.99;
  double lr = 1e-3;
  double adam_mom = 0.9;
  double adam_eps = 1e-7;
  double lr_decay = 0.0;
  double policy_reg = 1e-3;
  double modeling_reg = 1e-3;
  double critic_reg = 1.0;
  double critic_clip_per_agent = 10.0;
  double policy_clip = 0.5;
  double soft_reward_scale = 100.0;
  double modeling_clip = 0.5;
  double trdn_clip_per_agent = 10.0;
  double eps_min = 0.01;
  double eps_max = 100.0;
  long delay = 100;
  double tsallis_q = 0.2;
  double coord_delta = 0.2;
  int coord_sample_size = 0;
  double target_tau = 0.005;

  double epsilon_total = 0.05;
  double epsilon_init = 1.0;
  int k_fast = 5;
  bool update_epsilon = true;
  double ns_cap = 10.0;
  double ns_aux_weight = 0.1;
  int eps_embedding = 8;
  int trdn_rounds = 1;

  int eval_interval = 1000;
  int eval_episodes = 10;
  int checkpoint_every = 0;
  int rollout_workers = 1;
};

class ExperimentConfig {
 public:
  ExperimentConfig() : values_(defaults()) {}

  /// Flat table of every accepted key with its full-scale default.
  static json defaults() {
    return json{
        {"algorithm", "mamd"},
        {"seed", 0},
        {"seeds", json::array({0, 1, 2, 3, 4})},
        {"output_dir", "runs"},
        {"profile", "full"},
        {"env.name", "spread"},
        {"env.horizon", 25},
        {"env.n_parallel", 12},
        {"env.spread_agents", 2},
        {"step_size", 50000},
        {"num_epochs_per_step", 4},
        {"steps_per_update", 100},
        {"buffer_size", 1000000},
        {"batch_size", 1024},
        {"batch_handling", "shuffle"},
        {"num_critic_attention_heads", 4},
        {"value_loss", "mse"},
        {"modeling_policy_loss", "cross_entropy"},
        {"discount", 0.99},
        {"optimizer", "adam"},
        {"adam_lr", 1e-3},
        {"adam_mom", 0.9},
        {"adam_eps", 1e-7},
        {"lr_decay", 0.0},
        {"policy_regularization_coefficient", 1e-3},
        {"modeling_policy_regularization_coefficient", 1e-3},
        {"critic_regularization_coefficient", 1.0},
        {"critic_clip_grad_per_agent", 10.0},
        {"policy_clip_grad", 0.5},
        {"soft_reward_scale", 100.0},
        {"modeling_policy_clip_grad", 0.5},
        {"trdn_clip_grad_per_agent", 10.0},
        {"trust_region_clip_min", 0.01},
        {"trust_region_clip_max", 100.0},
        {"mirror_descent_delay", 100},
        {"tsallis_q", 0.2},
        {"coord.delta", 0.2},
        {"coord.sample_size", 0},
        {"hidden_size", 128},
        {"target_tau", 0.005},
        {"epsilon_total", 0.05},
        {"mamt.epsilon_init", 1.0},
        {"mamt.k_fast", 5},
        {"mamt.update_epsilon", true},
        {"ns.cap", 10.0},
        {"ns.aux_weight", 0.1},
        {"trdn.eps_embedding", 8},
        {"trdn.rounds", 1},
        {"eval.interval", 1000},
        {"eval.episodes", 10},
        {"checkpoint.every_updates", 0},
        {"rollout_workers", 1},
    };
  }

  /// Reduced budget for single-core runs.
  static json desk_profile() { return json{{"batch_size", 256}, {"hidden_size", 64}, {"step_size", 20000}}; }

  static json flatten(const json& nested) {
    if (!nested.is_object()) throw ConfigError("config root must be an object");
    json flat = json::object();
    const json pointers = nested.flatten();
    for (auto& [k, v] : pointers.items()) {
      // json::flatten yields JSON pointers; turn "/env/name" into "env.name"
      // and fold array elements back into their array.
      std::string key = k.substr(1);
      std::string dotted;
      bool array_elem = false;
      std::size_t start = 0;
      std::vector<std::string> parts;
      while (true) {
        const auto slash = key.find('/', start);
        parts.push_back(key.substr(start, slash == std::string::npos ? std::string::npos : slash - start));
        if (slash == std::string::npos) break;
        start = slash + 1;
      }
      if (parts.size() > 1 && !parts.back().empty() &&
          parts.back().find_first_not_of("0123456789") == std::string::npos) {
        array_elem = true;
        parts.pop_back();
      }
      for (std::size_t p = 0; p < parts.size(); ++p) dotted += (p ? "." : "") + parts[p];
      if (array_elem) {
        if (!flat.contains(dotted)) flat[dotted] = json::array();
        flat[dotted].push_back(v);
      } else {
        flat[dotted] = v;
      }
    }
    return flat;
  }

  static ExperimentConfig from_json(const json& doc) {
    ExperimentConfig c;
    json flat;
    std::vector<std::string> overrides;
    if (doc.is_object() && doc.contains("config") && doc.contains("overrides")) {
      flat = doc.at("config");
      overrides = doc.at("overrides").get<std::vector<std::string>>();
    } else {
      flat = flatten(doc);
      for (auto& [k, v] : flat.items()) overrides.push_back(k);
    }
    if (flat.contains("profile")) c.set("profile", flat.at("profile"));
    for (auto& [k, v] : flat.items())
      if (k != "profile") c.set(k, v);
    c.overrides_ = std::set<std::string>(overrides.begin(), overrides.end());
    return c;
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json doc;
    try {
      in >> doc;
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + path + "': " + e.what());
    }
    return from_json(doc);
  }

  void set(const std::string& key, const json& value) {
    const json d = defaults();
    if (!d.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    const json& ref = d.at(key);
    const bool ok = (ref.is_number() && (value.is_number() || value.is_string())) ||
                    (ref.is_string() && value.is_string()) || (ref.is_boolean() && value.is_boolean()) ||
                    (ref.is_array() && value.is_array());
    if (!ok) throw ConfigError("config key '" + key + "' has the wrong type");
    if (ref.is_number() && value.is_string()) number_or_inf(value, key);
    if (key == "profile") {
      const auto p = value.get<std::string>();
      if (p == "desk") {
        const json prof = desk_profile();
        for (auto& [k, v] : prof.items())
          if (!overrides_.count(k)) values_[k] = v;
      } else if (p != "full") {
        throw ConfigError("unknown profile '" + p + "' (expected full | desk)");
      }
    }
    values_[key] = value;
    overrides_.insert(key);
  }

  const json& get(const std::string& key) const {
    if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    return values_.at(key);
  }

  const std::set<std::string>& overrides() const { return overrides_; }

  json snapshot() const {
    return json{{"config", values_}, {"overrides", std::vector<std::string>(overrides_.begin(), overrides_.end())}};
  }

  RunSettings resolve() const {
    RunSettings s;
    auto num = [&](const char* k) { return number_or_inf(get(k), k); };
    auto integer = [&](const char* k) {
      const double v = num(k);
      if (v != std::floor(v) || !std::isfinite(v)) throw ConfigError(std::string("config key '") + k + "' must be an integer");
      return static_cast<long>(v);
    };
    s.algorithm = parse_algorithm(get("algorithm").get<std::string>());
    s.seed = static_cast<std::uint64_t>(integer("seed"));
    for (const auto& v : get("seeds")) s.seeds.push_back(v.get<std::uint64_t>());
    s.output_dir = get("output_dir").get<std::string>();
    s.env_name = get("env.name").get<std::string>();
    s.horizon = static_cast<int>(integer("env.horizon"));
    s.n_parallel = static_cast<int>(integer("env.n_parallel"));
    s.spread_agents = static_cast<int>(integer("env.spread_agents"));
    s.step_size = integer("step_size");
    s.epochs_per_step = static_cast<int>(integer("num_epochs_per_step"));
    s.steps_per_update = static_cast<int>(integer("steps_per_update"));
    s.buffer_size = integer("buffer_size");
    s.batch_size = static_cast<int>(integer("batch_size"));
    s.heads = static_cast<int>(integer("num_critic_attention_heads"));
    s.hidden = static_cast<int>(integer("hidden_size"));
    s.discount = num("discount");
    s.lr = num("adam_lr");
    s.adam_mom = num("adam_mom");
    s.adam_eps = num("adam_eps");
    s.lr_decay = num("lr_decay");
    s.policy_reg = num("policy_regularization_coefficient");
    s.modeling_reg = num("modeling_policy_regularization_coefficient");
    s.critic_reg = num("critic_regularization_coefficient");
    s.critic_clip_per_agent = num("critic_clip_grad_per_agent");
    s.policy_clip = num("policy_clip_grad");
    s.soft_reward_scale = num("soft_reward_scale");
    s.modeling_clip = num("modeling_policy_clip_grad");
    s.trdn_clip_per_agent = num("trdn_clip_grad_per_agent");
    s.eps_min = num("trust_region_clip_min");
    s.eps_max = num("trust_region_clip_max");
    s.delay = integer("mirror_descent_delay");
    s.tsallis_q = num("tsallis_q");
    s.coord_delta = num("coord.delta");
    s.coord_sample_size = static_cast<int>(integer("coord.sample_size"));
    s.target_tau = num("target_tau");
    s.epsilon_total = num("epsilon_total");
    s.epsilon_init = num("mamt.epsilon_init");
    s.k_fast = static_cast<int>(integer("mamt.k_fast"));
    s.update_epsilon = get("mamt.update_epsilon").get<bool>();
    s.ns_cap = num("ns.cap");
    s.ns_aux_weight = num("ns.aux_weight");
    s.eps_embedding = static_cast<int>(integer("trdn.eps_embedding"));
    s.trdn_rounds = static_cast<int>(integer("trdn.rounds"));
    s.eval_interval = static_cast<int>(integer("eval.interval"));
    s.eval_episodes = static_cast<int>(integer("eval.episodes"));
    s.checkpoint_every = static_cast<int>(integer("checkpoint.every_updates"));
    s.rollout_workers = static_cast<int>(integer("rollout_workers"));

    if (get("batch_handling").get<std::string>() != "shuffle") throw ConfigError("batch_handling supports only 'shuffle'");
    if (get("value_loss").get<std::string>() != "mse") throw ConfigError("value_loss supports only 'mse'");
    if (get("modeling_policy_loss").get<std::string>() != "cross_entropy")
      throw ConfigError("modeling_policy_loss supports only 'cross_entropy'");
    if (get("optimizer").get<std::string>() != "adam") throw ConfigError("optimizer supports only 'adam'");
    if (s.n_parallel < 1 || s.epochs_per_step < 1 || s.steps_per_update < 1 || s.batch_size < 1 || s.buffer_size < 1)
      throw ConfigError("parallel envs, epochs, steps per update, batch and buffer sizes must be positive");
    if (s.batch_size > s.buffer_size) throw ConfigError("batch_size exceeds buffer_size");
    if (!(s.eps_min > 0.0 && s.eps_min <= s.eps_max)) throw ConfigError("trust region clip range is invalid");
    if (!(s.epsilon_total > 0.0)) throw ConfigError("epsilon_total must be positive");
    if (!(s.coord_delta >= 0.0 && s.coord_delta < 1.0)) throw ConfigError("coord.delta must lie in [0, 1)");
    if (s.rollout_workers < 1) throw ConfigError("rollout_workers must be >= 1");
    if (!(s.target_tau > 0.0 && s.target_tau <= 1.0)) throw ConfigError("target_tau must lie in (0, 1]");
    return s;
  }

 private:
  json values_;
  std::set<std::string> overrides_;
};

}  // namespace mamt::harness
