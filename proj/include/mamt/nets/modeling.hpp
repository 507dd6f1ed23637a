#pragma once

// Opponent-modeling networks: for each ordered pair (i, j != i), a predictor
// of agent j's action distribution from agent i's own observation.

#include "mamt/nets/policy.hpp"

namespace mamt::nets {

class ModelingNets {
 public:
  ModelingNets() = default;
  ModelingNets(const std::vector<int>& obs_dims, const std::vector<int>& action_dims, int hidden, nn::Rng& rng,
               nn::Init last = nn::Init::Default)
      : n_(static_cast<int>(obs_dims.size())), obs_dims_(obs_dims) {
    if (obs_dims.size() != action_dims.size()) throw std::invalid_argument("ModelingNets: dims mismatch");
    nets_.resize(static_cast<std::size_t>(n_ * n_));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j) nets_[index(i, j)] = nn::Mlp<Scalar>({obs_dims[i], hidden, hidden, action_dims[j]}, rng, last);
  }

  int n_agents() const { return n_; }
  int count() const { return n_ * (n_ - 1); }

  Var logits(int i, int j, const Var& obs_i) const {
    check_pair(i, j);
    if (obs_i.cols() != obs_dims_[i]) throw std::invalid_argument("ModelingNets: observation width mismatch");
    return nets_[index(i, j)](obs_i);
  }

  Var probs(int i, int j, const Var& obs_i) const { return floor_probs(ad::softmax_rows(logits(i, j, obs_i))); }

  Params parameters() const {
    Params p;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j) nets_[index(i, j)].collect(p);
    return p;
  }

 private:
  void check_pair(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_) throw std::out_of_range("ModelingNets: agent index");
    if (i == j) throw std::invalid_argument("ModelingNets: an agent does not model itself");
  }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i * n_ + j); }

  int n_ = 0;
  std::vector<int> obs_dims_;
  std::vector<nn::Mlp<Scalar>> nets_;
};

}  // namespace mamt::nets
