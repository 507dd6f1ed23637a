#pragma once

// Cooperative partially observable stochastic game interface.

#include "mamt/error.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mamt::env {

using Observation = std::vector<double>;
using JointObservation = std::vector<Observation>;

/// Bounded box descriptor for one agent's observation vector.
struct BoxSpace {
  int dim = 0;
  double low = 0.0;
  double high = 0.0;
};

struct PosgSpec {
  int n_agents = 0;
  int n_states = 0;  // 0 when the state space is continuous
  std::vector<int> action_spaces;  // number of discrete actions per agent
  std::vector<BoxSpace> observation_spaces;
  int horizon = 1;

  void validate() const {
    if (n_agents < 2) throw std::invalid_argument("PosgSpec: need at least two agents");
    if (horizon < 1) throw std::invalid_argument("PosgSpec: horizon must be >= 1");
    if (static_cast<int>(action_spaces.size()) != n_agents ||
        static_cast<int>(observation_spaces.size()) != n_agents)
      throw std::invalid_argument("PosgSpec: per-agent space count differs from n_agents");
    for (int a : action_spaces)
      if (a < 1) throw std::invalid_argument("PosgSpec: empty action space");
  }
};

/// Symmetric agent-dependency graph: adjacency(i, j) means agent i's reward
/// depends on agent j. The diagonal is always set.
class CouplingGraph {
 public:
  CouplingGraph() = default;
  explicit CouplingGraph(int n) : n_(n), adj_(static_cast<std::size_t>(n * n), false) {
    for (int i = 0; i < n; ++i) set(i, i);
  }

  static CouplingGraph full(int n) {
    CouplingGraph g(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g.set(i, j);
    return g;
  }

  void set(int i, int j) {
    adj_[index(i, j)] = true;
    adj_[index(j, i)] = true;
  }

  bool coupled(int i, int j) const { return adj_[index(i, j)]; }
  int size() const { return n_; }

  /// Connected components, each sorted, ordered by smallest member.
  std::vector<std::vector<int>> components() const {
    std::vector<int> label(static_cast<std::size_t>(n_), -1);
    std::vector<std::vector<int>> out;
    for (int s = 0; s < n_; ++s) {
      if (label[s] >= 0) continue;
      std::vector<int> comp{s};
      label[s] = static_cast<int>(out.size());
      for (std::size_t k = 0; k < comp.size(); ++k)
        for (int j = 0; j < n_; ++j)
          if (label[j] < 0 && coupled(comp[k], j)) {
            label[j] = label[s];
            comp.push_back(j);
          }
      std::sort(comp.begin(), comp.end());
      out.push_back(std::move(comp));
    }
    return out;
  }

  bool symmetric() const {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (coupled(i, j) != coupled(j, i)) return false;
    return true;
  }

 private:
  std::size_t index(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_) throw std::out_of_range("CouplingGraph: agent out of range");
    return static_cast<std::size_t>(i * n_ + j);
  }

  int n_ = 0;
  std::vector<bool> adj_;
};

/// One environment step for all agents; the replay-buffer unit.
struct TransitionRecord {
  JointObservation obs;
  std::vector<int> actions;
  std::vector<double> rewards;
  JointObservation next_obs;
  std::vector<bool> dones;

  bool consistent(int n_agents) const {
    const auto n = static_cast<std::size_t>(n_agents);
    return obs.size() == n && actions.size() == n && rewards.size() == n && next_obs.size() == n &&
           dones.size() == n;
  }
};

struct StepResult {
  JointObservation obs;
  std::vector<double> rewards;
  std::vector<bool> dones;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const PosgSpec& spec() const = 0;
  virtual std::string name() const = 0;
  virtual JointObservation reset(std::uint64_t seed) = 0;
  virtual StepResult step(std::span<const int> actions) = 0;
  virtual bool episode_done() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
  virtual const CouplingGraph& coupling() const = 0;

  int n_agents() const { return spec().n_agents; }

 protected:
  void check_actions(std::span<const int> actions) const {
    const auto& sp = spec();
    if (static_cast<int>(actions.size()) != sp.n_agents)
      throw std::invalid_argument("joint action has " + std::to_string(actions.size()) + " entries, expected " +
                                  std::to_string(sp.n_agents));
    for (int i = 0; i < sp.n_agents; ++i)
      if (actions[i] < 0 || actions[i] >= sp.action_spaces[i]) throw InvalidAction(i, actions[i], sp.action_spaces[i]);
  }
};

}  // namespace mamt::env
