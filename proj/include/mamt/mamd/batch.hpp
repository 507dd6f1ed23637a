#pragma once

#include "mamt/nets/policy.hpp"

namespace mamt::mamd {

using nets::Mat;
using nets::Var;

/// A sampled minibatch, stored agent-major.
struct Batch {
  std::vector<Mat> obs;                    // [agent] B x obs_i
  std::vector<std::vector<int>> actions;   // [agent] B
  std::vector<Mat> rewards;                // [agent] B x 1
  std::vector<Mat> next_obs;               // [agent] B x obs_i
  std::vector<Mat> dones;                  // [agent] B x 1, 1.0 when terminal

  int n_agents() const { return static_cast<int>(obs.size()); }
  int size() const { return obs.empty() ? 0 : static_cast<int>(obs.front().rows()); }

  void validate() const {
    const auto n = obs.size();
    if (n == 0) throw std::invalid_argument("Batch: no agents");
    if (actions.size() != n || rewards.size() != n || next_obs.size() != n || dones.size() != n)
      throw std::invalid_argument("Batch: per-agent field counts differ");
    const auto b = obs.front().rows();
    if (b == 0) throw std::invalid_argument("Batch: empty batch");
    for (std::size_t i = 0; i < n; ++i)
      if (obs[i].rows() != b || next_obs[i].rows() != b || rewards[i].rows() != b || dones[i].rows() != b ||
          static_cast<Eigen::Index>(actions[i].size()) != b)
        throw std::invalid_argument("Batch: ragged batch");
  }
};

inline std::vector<Var> constants(const std::vector<Mat>& ms) {
  std::vector<Var> out;
  out.reserve(ms.size());
  for (const auto& m : ms) out.push_back(ad::constant<nets::Scalar>(m));
  return out;
}

}  // namespace mamt::mamd
