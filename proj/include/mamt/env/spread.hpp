#pragma once

// Cooperative navigation ("Spread") on a bounded 2-D arena with discrete
// movement. Agents are grouped by the connected components of a coupling
// graph; every group owns as many landmarks as it has members and is
// rewarded by how closely its members cover those landmarks, minus one for
// each collision with a coupled agent.

#include "mamt/env/posg.hpp"

#include <array>
#include <cmath>
#include <random>

namespace mamt::env {

struct SpreadOptions {
  int n_agents = 2;
  int n_landmarks = 2;
  int horizon = 25;
  double arena_half_width = 1.0;
  double move_step = 0.1;
  double agent_radius = 0.15;
};

enum class SpreadVariant { Sep, Mix, Ful };

class Spread final : public Environment {
 public:
  static constexpr int kNumActions = 5;  // no-op, +x, -x, +y, -y

  Spread(SpreadOptions opt, CouplingGraph coupling, std::string name)
      : opt_(opt), coupling_(std::move(coupling)), name_(std::move(name)) {
    if (coupling_.size() != opt_.n_agents || !coupling_.symmetric())
      throw std::invalid_argument("Spread: coupling graph must be symmetric over all agents");
    groups_ = coupling_.components();
    group_of_.assign(static_cast<std::size_t>(opt_.n_agents), 0);
    for (std::size_t g = 0; g < groups_.size(); ++g)
      for (int a : groups_[g]) group_of_[a] = static_cast<int>(g);
    if (groups_.size() == 1) {
      owned_.push_back({});
      for (int l = 0; l < opt_.n_landmarks; ++l) owned_[0].push_back(l);
    } else {
      if (opt_.n_landmarks != opt_.n_agents)
        throw std::invalid_argument("Spread: partially coupled variants need one landmark per agent");
      int next = 0;
      for (const auto& g : groups_) {
        owned_.push_back({});
        for (std::size_t k = 0; k < g.size(); ++k) owned_.back().push_back(next++);
      }
    }

    spec_.n_agents = opt_.n_agents;
    spec_.n_states = 0;
    spec_.horizon = opt_.horizon;
    spec_.action_spaces.assign(static_cast<std::size_t>(opt_.n_agents), kNumActions);
    const int obs_dim = 2 + 2 * opt_.n_landmarks + 2 * (opt_.n_agents - 1);
    const double w = opt_.arena_half_width;
    spec_.observation_spaces.assign(static_cast<std::size_t>(opt_.n_agents), BoxSpace{obs_dim, -2.0 * w, 2.0 * w});
    spec_.validate();
    agents_.assign(static_cast<std::size_t>(opt_.n_agents), {0.0, 0.0});
    landmarks_.assign(static_cast<std::size_t>(opt_.n_landmarks), {0.0, 0.0});
  }

  /// Standard fully coupled Spread.
  static Spread standard(int n_agents = 2, int horizon = 25) {
    SpreadOptions o;
    o.n_agents = n_agents;
    o.n_landmarks = n_agents;
    o.horizon = horizon;
    return Spread(o, CouplingGraph::full(n_agents), "spread");
  }

  /// Three agents, three landmarks. Sep: no couplings. Mix: agents 0 and 1
  /// coupled, agent 2 alone. Ful: everyone coupled.
  static Spread three(SpreadVariant v, int horizon = 25) {
    SpreadOptions o;
    o.n_agents = 3;
    o.n_landmarks = 3;
    o.horizon = horizon;
    CouplingGraph g(3);
    std::string name = "spread3-sep";
    if (v == SpreadVariant::Mix) {
      g.set(0, 1);
      name = "spread3-mix";
    } else if (v == SpreadVariant::Ful) {
      g = CouplingGraph::full(3);
      name = "spread3-ful";
    }
    return Spread(o, g, name);
  }

  const PosgSpec& spec() const override { return spec_; }
  std::string name() const override { return name_; }
  const CouplingGraph& coupling() const override { return coupling_; }
  const SpreadOptions& options() const { return opt_; }

  JointObservation reset(std::uint64_t seed) override {
    rng_.seed(seed);
    std::uniform_real_distribution<double> u(-opt_.arena_half_width, opt_.arena_half_width);
    for (auto& p : agents_) p = {u(rng_), u(rng_)};
    for (auto& p : landmarks_) p = {u(rng_), u(rng_)};
    t_ = 0;
    return observe();
  }

  StepResult step(std::span<const int> actions) override {
    check_actions(actions);
    if (episode_done()) throw std::logic_error("Spread: step after the episode terminated");
    static constexpr std::array<std::array<double, 2>, kNumActions> kDir{
        {{0.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0}}};
    const double w = opt_.arena_half_width;
    for (int i = 0; i < opt_.n_agents; ++i) {
      auto& p = agents_[i];
      for (int d = 0; d < 2; ++d) p[d] = std::clamp(p[d] + opt_.move_step * kDir[actions[i]][d], -w, w);
    }
    ++t_;
    const auto rc = reward_components();
    std::vector<double> rewards(static_cast<std::size_t>(opt_.n_agents));
    for (int i = 0; i < opt_.n_agents; ++i) rewards[i] = rc.shared[i] - static_cast<double>(rc.collisions[i]);
    const bool done = episode_done();
    return StepResult{observe(), std::move(rewards), std::vector<bool>(static_cast<std::size_t>(opt_.n_agents), done)};
  }

  bool episode_done() const override { return t_ >= opt_.horizon; }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<Spread>(*this); }

  struct RewardComponents {
    std::vector<double> shared;  // coverage term of the agent's group
    std::vector<int> collisions;  // collisions with coupled agents
  };

  RewardComponents reward_components() const {
    RewardComponents rc;
    rc.shared.assign(static_cast<std::size_t>(opt_.n_agents), 0.0);
    rc.collisions.assign(static_cast<std::size_t>(opt_.n_agents), 0);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      double cover = 0.0;
      for (int l : owned_[g]) {
        double best = std::numeric_limits<double>::infinity();
        for (int a : groups_[g]) best = std::min(best, distance(agents_[a], landmarks_[l]));
        cover += best;
      }
      for (int a : groups_[g]) rc.shared[a] = -cover;
    }
    for (int i = 0; i < opt_.n_agents; ++i)
      for (int j = 0; j < opt_.n_agents; ++j)
        if (i != j && coupling_.coupled(i, j) && distance(agents_[i], agents_[j]) < 2.0 * opt_.agent_radius)
          ++rc.collisions[i];
    return rc;
  }

  using Point = std::array<double, 2>;
  const std::vector<Point>& agent_positions() const { return agents_; }
  const std::vector<Point>& landmark_positions() const { return landmarks_; }
  const std::vector<int>& owned_landmarks(int agent) const { return owned_[group_of_[agent]]; }

  /// Places entities directly; used to probe reward properties.
  void set_positions(std::vector<Point> agents, std::vector<Point> landmarks) {
    if (agents.size() != agents_.size() || landmarks.size() != landmarks_.size())
      throw std::invalid_argument("Spread::set_positions: wrong entity count");
    agents_ = std::move(agents);
    landmarks_ = std::move(landmarks);
  }

  JointObservation observe() const {
    JointObservation out;
    for (int i = 0; i < opt_.n_agents; ++i) {
      const auto& p = agents_[i];
      Observation o{p[0], p[1]};
      for (const auto& l : landmarks_) {
        o.push_back(l[0] - p[0]);
        o.push_back(l[1] - p[1]);
      }
      for (int j = 0; j < opt_.n_agents; ++j) {
        if (j == i) continue;
        o.push_back(agents_[j][0] - p[0]);
        o.push_back(agents_[j][1] - p[1]);
      }
      out.push_back(std::move(o));
    }
    return out;
  }

 private:
  static double distance(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

  SpreadOptions opt_;
  CouplingGraph coupling_;
  std::string name_;
  PosgSpec spec_;
  std::vector<std::vector<int>> groups_;
  std::vector<std::vector<int>> owned_;
  std::vector<int> group_of_;
  std::vector<Point> agents_;
  std::vector<Point> landmarks_;
  std::mt19937_64 rng_;
  int t_ = 0;
};

}  // namespace mamt::env
