#pragma once

// Two-agent, three-state Markov game used as an exact oracle target: the game
// starts in s0, both agents pick one of two actions, and the joint action
// moves the system to one of the absorbing states s1 or s2.

#include "mamt/env/posg.hpp"

#include <array>
#include <random>

namespace mamt::env {

/// Parameterisation of the opponent-policy change studied on this game:
/// agent 2 moves from (m, 1 - m) to (m/2, 1 - m/2).
struct TabularGameSpec {
  double m = 0.5;

  double n() const { return m / 2.0; }

  void validate() const {
    if (!(m > 0.0 && m < 1.0)) throw std::invalid_argument("TabularGameSpec: m must lie in (0, 1)");
  }
};

class TabularGame final : public Environment {
 public:
  static constexpr int kS0 = 0;
  static constexpr int kS1 = 1;
  static constexpr int kS2 = 2;

  TabularGame() {
    spec_.n_agents = 2;
    spec_.n_states = 3;
    spec_.action_spaces = {2, 2};
    spec_.observation_spaces = {BoxSpace{3, 0.0, 1.0}, BoxSpace{3, 0.0, 1.0}};
    spec_.horizon = 1;
    coupling_ = CouplingGraph::full(2);
  }

  const PosgSpec& spec() const override { return spec_; }
  std::string name() const override { return "tabular"; }
  const CouplingGraph& coupling() const override { return coupling_; }

  JointObservation reset(std::uint64_t seed) override {
    rng_.seed(seed);
    state_ = kS0;
    return observe();
  }

  StepResult step(std::span<const int> actions) override {
    check_actions(actions);
    if (state_ != kS0) throw std::logic_error("TabularGame: step after termination");
    const auto dist = transition_distribution(actions[0], actions[1]);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    state_ = u(rng_) < dist[0] ? kS1 : kS2;
    const double r = state_ == kS1 ? 1.0 : 0.0;
    return StepResult{observe(), {r, r}, {true, true}};
  }

  bool episode_done() const override { return state_ != kS0; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<TabularGame>(*this); }

  /// Exact (p(s1), p(s2)) from s0 under joint action (a1, a2).
  std::array<double, 2> transition_distribution(int a1, int a2) const {
    const std::array<int, 2> a{a1, a2};
    check_actions(a);
    const double p1 = kToS1[a1][a2];
    return {p1, 1.0 - p1};
  }

  int state() const { return state_; }

 private:
  // p(s1 | a1, a2, s0); rows are agent 1's action, columns agent 2's.
  static constexpr double kToS1[2][2] = {{0.4, 0.2}, {0.5, 0.7}};

  JointObservation observe() const {
    Observation o(3, 0.0);
    o[static_cast<std::size_t>(state_)] = 1.0;
    return {o, o};
  }

  PosgSpec spec_;
  CouplingGraph coupling_;
  std::mt19937_64 rng_;
  int state_ = kS0;
};

/// Exact next-state distribution; only tabular environments define it.
inline std::array<double, 2> transition_distribution(const Environment& env, int a1, int a2) {
  const auto* tab = dynamic_cast<const TabularGame*>(&env);
  if (tab == nullptr)
    throw UnsupportedOperation("transition_distribution: environment '" + env.name() + "' is not tabular");
  return tab->transition_distribution(a1, a2);
}

}  // namespace mamt::env
