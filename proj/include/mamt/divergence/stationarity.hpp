#pragma once

// Divergence of one agent's induced next-state distribution when the other
// agent's policy changes, evaluated exactly on the two-agent tabular game.

#include "mamt/divergence/distribution.hpp"
#include "mamt/env/tabular_game.hpp"

#include <algorithm>

namespace mamt::divergence {

/// Next-state distribution from s0 seen by `agent` taking `action` while the
/// other agent plays `other` (exact marginalisation).
inline DiscreteDistribution induced_transition(const env::Environment& game, int agent, int action,
                                               const DiscreteDistribution& other) {
  if (agent != 0 && agent != 1) throw std::out_of_range("induced_transition: agent must be 0 or 1");
  if (other.size() != 2) throw std::invalid_argument("induced_transition: opponent policy needs two actions");
  double p1 = 0.0;
  for (int b = 0; b < 2; ++b) {
    const auto d = agent == 0 ? env::transition_distribution(game, action, b) : env::transition_distribution(game, b, action);
    p1 += other[b] * d[0];
  }
  p1 = std::clamp(p1, 0.0, 1.0);
  return DiscreteDistribution::bernoulli(p1);
}

/// KL(p(.|s0, a_i) under `other` || the same under `other_next`).
inline double transition_kl(const env::Environment& game, int agent, int action, const DiscreteDistribution& other,
                            const DiscreteDistribution& other_next) {
  return kl(induced_transition(game, agent, action, other), induced_transition(game, agent, action, other_next));
}

/// The paired change studied on the tabular game: agent 2 moves from
/// (m, 1 - m) to (m/2, 1 - m/2); returns agent 1's transition KL for `action`.
inline double transition_kl(const env::Environment& game, const env::TabularGameSpec& s, int action) {
  s.validate();
  return transition_kl(game, 0, action, DiscreteDistribution::bernoulli(s.m), DiscreteDistribution::bernoulli(s.n()));
}

/// KL of agent 2's own policy change under the same pairing.
inline double policy_kl(const env::TabularGameSpec& s) {
  s.validate();
  return kl(DiscreteDistribution::bernoulli(s.m), DiscreteDistribution::bernoulli(s.n()));
}

/// Per-agent stationarity bounds over a sequence of joint policies
/// (one two-action distribution per agent at s0).
struct StationarityReport {
  std::vector<double> delta_max;   // max over consecutive pairs and own actions
  std::vector<double> delta_mean;  // own-policy-weighted mean, averaged over pairs
  double system_max = 0.0;         // mean of delta_max
  double system_mean = 0.0;        // mean of delta_mean
};

using TabularJointPolicy = std::vector<DiscreteDistribution>;

inline StationarityReport stationarity_report(const env::Environment& game,
                                              std::span<const TabularJointPolicy> sequence) {
  if (sequence.size() < 2) throw std::invalid_argument("stationarity_report: need at least two policies");
  constexpr int n = 2;
  for (const auto& jp : sequence)
    if (static_cast<int>(jp.size()) != n) throw std::invalid_argument("stationarity_report: expected two agents");
  StationarityReport r;
  r.delta_max.assign(n, 0.0);
  r.delta_mean.assign(n, 0.0);
  const double pairs = static_cast<double>(sequence.size() - 1);
  for (std::size_t t = 0; t + 1 < sequence.size(); ++t) {
    for (int i = 0; i < n; ++i) {
      const int j = 1 - i;
      for (int a = 0; a < 2; ++a) {
        const double v = transition_kl(game, i, a, sequence[t][j], sequence[t + 1][j]);
        r.delta_max[i] = std::max(r.delta_max[i], v);
        r.delta_mean[i] += sequence[t][i][a] * v / pairs;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    r.system_max += r.delta_max[i] / n;
    r.system_mean += r.delta_mean[i] / n;
  }
  return r;
}

}  // namespace mamt::divergence
