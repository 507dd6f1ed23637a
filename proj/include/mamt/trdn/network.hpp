#pragma once

// Divergence network over the agent graph. Two branches with identical
// structure and separate parameters each encode (obs, action, trust-region
// size) per agent and run one round of weighted message passing; a shared
// head maps the concatenated branch embeddings to a non-negative per-agent
// divergence estimate. Node parameters are shared across agents so the
// network is equivariant to agent relabelling.

#include "mamt/nets/policy.hpp"

namespace mamt::trdn {

using nets::Mat;
using nets::Params;
using nets::Scalar;
using nets::Var;

struct TrdnOptions {
  int hidden = 64;
  int eps_embedding = 8;
  int rounds = 1;
};

class Branch {
 public:
  Branch() = default;
  Branch(int obs_dim, int n_actions, const TrdnOptions& opt, nn::Rng& rng)
      : input_(obs_dim + n_actions, opt.hidden, rng),
        eps_(1, opt.eps_embedding, rng),
        node_(opt.hidden + opt.eps_embedding, opt.hidden, rng) {
    for (int r = 0; r < opt.rounds; ++r) {
      self_.emplace_back(opt.hidden, opt.hidden, rng);
      nbr_.emplace_back(opt.hidden, opt.hidden, rng, false);
    }
  }

  /// Pre-message node embedding of every agent (B x H each).
  std::vector<Var> encode(const std::vector<Mat>& obs, const std::vector<Mat>& actions, const Var& log_eps) const {
    const auto n = obs.size();
    if (actions.size() != n || static_cast<std::size_t>(log_eps.cols()) != n || log_eps.rows() != 1)
      throw std::invalid_argument("trdn encode: expected one observation, action and trust-region size per agent");
    std::vector<Var> out;
    for (std::size_t i = 0; i < n; ++i) {
      const auto b = obs[i].rows();
      Mat x(b, obs[i].cols() + actions[i].cols());
      x << obs[i], actions[i];
      const Var h = ad::leaky_relu(input_(ad::constant<Scalar>(std::move(x))));
      const Var e = ad::leaky_relu(eps_(ad::slice_cols(log_eps, static_cast<Eigen::Index>(i), 1)));
      out.push_back(ad::leaky_relu(node_(ad::concat_cols<Scalar>({h, ad::broadcast_rows(e, b)}))));
    }
    return out;
  }

  /// h'_i = leaky(h_i W_self + b + (sum_j w_ij h_j) W_nbr), repeated per round.
  std::vector<Var> message_pass(std::vector<Var> h, const Mat& weights) const {
    const auto n = static_cast<Eigen::Index>(h.size());
    if (weights.rows() != n || weights.cols() != n) throw std::invalid_argument("trdn message_pass: weight shape");
    for (std::size_t r = 0; r < self_.size(); ++r) {
      std::vector<Var> next;
      for (Eigen::Index i = 0; i < n; ++i) {
        Var agg;
        for (Eigen::Index j = 0; j < n; ++j) {
          if (j == i || weights(i, j) == 0.0) continue;
          const Var t = ad::scale(h[j], weights(i, j));
          agg = agg.defined() ? ad::add(agg, t) : t;
        }
        Var pre = self_[r](h[i]);
        if (agg.defined()) pre = ad::add(pre, nbr_[r](agg));
        next.push_back(ad::leaky_relu(pre));
      }
      h = std::move(next);
    }
    return h;
  }

  void collect(Params& p) const {
    input_.collect(p);
    eps_.collect(p);
    node_.collect(p);
    for (const auto& l : self_) l.collect(p);
    for (const auto& l : nbr_) l.collect(p);
  }

 private:
  nn::Linear<Scalar> input_, eps_, node_;
  std::vector<nn::Linear<Scalar>> self_, nbr_;
};

class Trdn {
 public:
  Trdn() = default;
  Trdn(int obs_dim, int n_actions, TrdnOptions opt, nn::Rng& rng)
      : opt_(opt),
        f_(obs_dim, n_actions, opt, rng),
        g_(obs_dim, n_actions, opt, rng),
        head1_(2 * opt.hidden, opt.hidden, rng),
        head2_(opt.hidden, 1, rng) {}

  const Branch& branch_f() const { return f_; }
  const Branch& branch_g() const { return g_; }

  /// Non-negative per-agent estimates (1 x n), batch-averaged.
  Var kl_estimate(const std::vector<Var>& hf, const std::vector<Var>& hg) const {
    if (hf.size() != hg.size()) throw std::invalid_argument("trdn kl_estimate: branch sizes differ");
    std::vector<Var> per_agent;
    for (std::size_t i = 0; i < hf.size(); ++i) {
      const Var z = ad::leaky_relu(head1_(ad::concat_cols<Scalar>({hf[i], hg[i]})));
      per_agent.push_back(ad::mean(ad::softplus(head2_(z))));
    }
    return ad::concat_cols(per_agent);
  }

  /// Full pass. `eps` is 1 x n and may be a parameter so that the
  /// estimate can be differentiated with respect to it.
  Var forward(const std::vector<Mat>& obs, const std::vector<Mat>& actions, const Var& eps, const Mat& weights) const {
    const Var log_eps = ad::log(eps);
    return kl_estimate(f_.message_pass(f_.encode(obs, actions, log_eps), weights),
                       g_.message_pass(g_.encode(obs, actions, log_eps), weights));
  }

  Params parameters() const {
    Params p;
    f_.collect(p);
    g_.collect(p);
    head1_.collect(p);
    head2_.collect(p);
    return p;
  }

  Params branch_g_parameters() const {
    Params p;
    g_.collect(p);
    return p;
  }

 private:
  TrdnOptions opt_;
  Branch f_, g_;
  nn::Linear<Scalar> head1_, head2_;
};

/// Row vector of trust-region sizes as a differentiable leaf.
inline Var epsilon_leaf(std::span<const double> eps) {
  Mat m(1, static_cast<Eigen::Index>(eps.size()));
  for (std::size_t k = 0; k < eps.size(); ++k) m(0, static_cast<Eigen::Index>(k)) = eps[k];
  return ad::parameter<Scalar>(std::move(m));
}

}  // namespace mamt::trdn
