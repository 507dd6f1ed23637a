#pragma once

// Per-agent categorical policy: MLP from the local observation to action
// logits, with a probability floor so every log-probability stays finite.

#include "mamt/nn/layers.hpp"

#include <random>

namespace mamt::nets {

using Scalar = double;
using Var = ad::Var<Scalar>;
using Mat = ad::Matrix<Scalar>;
using Params = ad::ParamList<Scalar>;

inline constexpr double kProbFloor = 1e-8;

/// Draws one category from a probability row by inverse CDF.
inline int sample_categorical(const Eigen::Ref<const Eigen::RowVectorXd>& p, nn::Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double c = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    c += p(k);
    if (x < c) return static_cast<int>(k);
  }
  return static_cast<int>(p.size() - 1);
}

inline int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  Eigen::Index k = 0;
  p.maxCoeff(&k);
  return static_cast<int>(k);
}

/// Floored probabilities p(1 - K f) + f, still normalised.
inline Var floor_probs(const Var& p) {
  const double k = static_cast<double>(p.cols());
  return ad::add_scalar(ad::scale(p, 1.0 - k * kProbFloor), kProbFloor);
}

class Policy {
 public:
  Policy() = default;
  Policy(int obs_dim, int n_actions, int hidden, nn::Rng& rng, nn::Init last = nn::Init::Default)
      : net_({obs_dim, hidden, hidden, n_actions}, rng, last), obs_dim_(obs_dim), n_actions_(n_actions) {}

  int obs_dim() const { return obs_dim_; }
  int n_actions() const { return n_actions_; }

  Var logits(const Var& obs) const {
    if (obs.cols() != obs_dim_)
      throw std::invalid_argument("Policy: observation has " + std::to_string(obs.cols()) + " features, expected " +
                                  std::to_string(obs_dim_));
    return net_(obs);
  }

  Var probs(const Var& obs) const { return floor_probs(ad::softmax_rows(logits(obs))); }
  Var log_probs(const Var& obs) const { return ad::log(probs(obs)); }

  /// Forward pass without graph recording.
  Mat probs_value(const Mat& obs) const {
    ad::NoGradGuard g;
    return probs(ad::constant<Scalar>(obs)).value();
  }

  Policy deep_copy() const {
    Policy c = *this;
    c.net_ = net_.deep_copy();
    return c;
  }

  Params parameters() const {
    Params p;
    net_.collect(p);
    return p;
  }

 private:
  nn::Mlp<Scalar> net_;
  int obs_dim_ = 0;
  int n_actions_ = 0;
};

}  // namespace mamt::nets
