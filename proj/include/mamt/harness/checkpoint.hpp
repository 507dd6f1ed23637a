#pragma once

// Versioned JSON checkpoint of every parameter set plus snapshot counters.
// Layout is documented in docs/formats.md.

#include "mamt/harness/metrics.hpp"

namespace mamt::harness {

inline constexpr const char* kCheckpointFormat = "mamt-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline json params_to_json(const nets::Params& ps) {
  json arr = json::array();
  for (const auto& p : ps) {
    const auto& v = p.value();
    json data = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) data.push_back(v.data()[k]);
    arr.push_back(json{{"rows", v.rows()}, {"cols", v.cols()}, {"data", std::move(data)}});
  }
  return arr;
}

inline void params_from_json(nets::Params& ps, const json& arr, const std::string& name) {
  if (!arr.is_array() || arr.size() != ps.size())
    throw std::runtime_error("checkpoint: parameter count mismatch in set '" + name + "'");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& v = ps[k].mutable_value();
    const auto& e = arr[k];
    if (e.at("rows").get<Eigen::Index>() != v.rows() || e.at("cols").get<Eigen::Index>() != v.cols())
      throw std::runtime_error("checkpoint: shape mismatch in set '" + name + "'");
    const auto& data = e.at("data");
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = data[static_cast<std::size_t>(i)].get<double>();
  }
}

inline json make_checkpoint(Learner& learner, long env_steps) {
  json sets = json::object();
  for (auto& np : learner.parameter_sets()) sets[np.name] = params_to_json(np.params);
  return json{{"format", kCheckpointFormat},
              {"version", kCheckpointVersion},
              {"algorithm", to_string(learner.settings().algorithm)},
              {"n_agents", learner.n_agents()},
              {"iteration", learner.iteration()},
              {"refresh_phase", learner.iteration() % learner.settings().delay},
              {"env_steps", env_steps},
              {"epsilon", doubles_to_json(learner.epsilon())},
              {"parameter_sets", std::move(sets)}};
}

inline void load_checkpoint(Learner& learner, const json& ck) {
  if (ck.value("format", "") != kCheckpointFormat) throw std::runtime_error("checkpoint: unrecognised format");
  if (ck.value("version", 0) != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(ck.value("version", 0)));
  if (ck.at("n_agents").get<int>() != learner.n_agents()) throw std::runtime_error("checkpoint: agent count mismatch");
  const auto& sets = ck.at("parameter_sets");
  for (auto& np : learner.parameter_sets()) {
    if (!sets.contains(np.name)) throw std::runtime_error("checkpoint: missing parameter set '" + np.name + "'");
    params_from_json(np.params, sets.at(np.name), np.name);
  }
  learner.restore_counters(ck.at("iteration").get<long>(), json_to_doubles(ck.at("epsilon"), "epsilon"));
}

}  // namespace mamt::harness
