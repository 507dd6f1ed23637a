#pragma once

// Pairwise coordination coefficients from counterfactual Q gaps: how much
// agent i's value moves when agent j's action is replaced by its
// policy-expectation.

#include "mamt/mamd/batch.hpp"
#include "mamt/nets/critic.hpp"

#include <cmath>

namespace mamt::coord {

using nets::Mat;
using nets::Var;

inline constexpr double kDefaultDelta = 0.2;

struct CoordinationMatrix {
  Mat pre;    // row-wise softmax over j != i; diagonal 0
  Mat post;   // pre with entries below delta zeroed
  double delta = kDefaultDelta;

  int size() const { return static_cast<int>(pre.rows()); }

  /// (post + post^T) / 2, the undirected weights used for message passing.
  Mat symmetric() const { return 0.5 * (post + post.transpose()); }
};

/// E_{a_j ~ pi_j}[Q_i(o, a with a_j replaced)] given Q_i for every a_j.
inline double counterfactual_marginal(std::span<const double> q_over_aj, std::span<const double> pi_j) {
  if (q_over_aj.size() != pi_j.size()) throw std::invalid_argument("counterfactual_marginal: size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < q_over_aj.size(); ++k) s += pi_j[k] * q_over_aj[k];
  return s;
}

/// Zeroes entries below delta; survivors keep their values.
inline Mat apply_threshold(const Mat& pre, double delta) {
  return pre.unaryExpr([delta](double v) { return v >= delta ? v : 0.0; });
}

/// Row-wise softmax over off-diagonal entries of a gap matrix, then threshold.
inline CoordinationMatrix coordination_from_gaps(const Mat& gaps, double delta = kDefaultDelta) {
  const auto n = gaps.rows();
  if (n < 2 || gaps.cols() != n) throw std::invalid_argument("coordination: need a square gap matrix with n >= 2");
  if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("coordination: delta must lie in [0, 1)");
  CoordinationMatrix c;
  c.delta = delta;
  c.pre = Mat::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) mx = std::max(mx, gaps(i, j));
    double z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) z += std::exp(gaps(i, j) - mx);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) c.pre(i, j) = std::exp(gaps(i, j) - mx) / z;
  }
  c.post = apply_threshold(c.pre, delta);
  return c;
}

/// Batch-mean |Q_i(o, a_{\j}) - Q_i(o, a)| for every ordered pair (i, j != i).
/// `pi[j]` holds agent j's action probabilities (B x A_j) at the batch.
inline Mat counterfactual_gaps(const nets::AttentionCritic& critic, const std::vector<Mat>& obs,
                               const std::vector<std::vector<int>>& actions, const std::vector<Mat>& pi) {
  ad::NoGradGuard guard;
  const int n = critic.n_agents();
  if (n < 2) throw std::invalid_argument("counterfactual_gaps: need at least two agents");
  if (static_cast<int>(obs.size()) != n || static_cast<int>(actions.size()) != n || static_cast<int>(pi.size()) != n)
    throw std::invalid_argument("counterfactual_gaps: expected one slot per agent");
  const auto b = obs.front().rows();
  if (b == 0) throw std::invalid_argument("counterfactual_gaps: empty batch");
  const auto& adims = critic.action_dims();
  const std::vector<Var> o = mamd::constants(obs);
  std::vector<Var> acts;
  for (int i = 0; i < n; ++i) acts.push_back(ad::constant<nets::Scalar>(nets::one_hot(actions[i], adims[i])));

  const auto base = critic.forward(o, acts);
  std::vector<Mat> q_taken(n);  // B x 1 per agent
  for (int i = 0; i < n; ++i) {
    q_taken[i].resize(b, 1);
    for (Eigen::Index r = 0; r < b; ++r) q_taken[i](r, 0) = base.q_all[i].value()(r, actions[i][r]);
  }

  Mat gaps = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    std::vector<Mat> marg(n, Mat::Zero(b, 1));
    for (int alt = 0; alt < adims[j]; ++alt) {
      std::vector<Var> swapped = acts;
      Mat oh = Mat::Zero(b, adims[j]);
      oh.col(alt).setOnes();
      swapped[j] = ad::constant<nets::Scalar>(oh);
      const auto out = critic.forward(o, swapped);
      for (int i = 0; i < n; ++i) {
        if (i == j) continue;
        for (Eigen::Index r = 0; r < b; ++r) marg[i](r, 0) += pi[j](r, alt) * out.q_all[i].value()(r, actions[i][r]);
      }
    }
    for (int i = 0; i < n; ++i)
      if (i != j) gaps(i, j) = (marg[i] - q_taken[i]).cwiseAbs().mean();
  }
  return gaps;
}

inline CoordinationMatrix coordination_coefficients(const nets::AttentionCritic& critic, const std::vector<Mat>& obs,
                                                    const std::vector<std::vector<int>>& actions,
                                                    const std::vector<Mat>& pi, double delta = kDefaultDelta) {
  return coordination_from_gaps(counterfactual_gaps(critic, obs, actions, pi), delta);
}

}  // namespace mamt::coord
