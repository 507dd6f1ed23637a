#pragma once

// Centralised attention critic. Each agent encodes its own (obs, action)
// pair; agent i queries the other agents' encodings through attention heads
// whose parameters are shared by all agents, and outputs Q values for every
// one of its own actions given the others' actions.

#include "mamt/nets/policy.hpp"

#include <cmath>

namespace mamt::nets {

inline Mat one_hot(std::span<const int> actions, int n_actions) {
  Mat m = Mat::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t b = 0; b < actions.size(); ++b) {
    if (actions[b] < 0 || actions[b] >= n_actions) throw std::out_of_range("one_hot: action out of range");
    m(static_cast<Eigen::Index>(b), actions[b]) = 1.0;
  }
  return m;
}

struct CriticOutput {
  std::vector<Var> q_all;                    // per agent, B x A_i
  Var attention_reg;                         // mean squared attention logits, summed over heads and agents
  std::vector<std::vector<Mat>> attention;   // [agent][head] B x (n-1) weights over the other agents
};

class AttentionCritic {
 public:
  AttentionCritic() = default;
  AttentionCritic(std::vector<int> obs_dims, std::vector<int> action_dims, int hidden, int heads, nn::Rng& rng)
      : obs_dims_(std::move(obs_dims)), action_dims_(std::move(action_dims)), hidden_(hidden), heads_(heads) {
    if (obs_dims_.size() != action_dims_.size() || obs_dims_.size() < 2)
      throw std::invalid_argument("AttentionCritic: need matching obs/action dims for at least two agents");
    if (heads < 1 || hidden % heads != 0) throw std::invalid_argument("AttentionCritic: hidden size must split into heads");
    const int d = hidden / heads;
    for (std::size_t i = 0; i < obs_dims_.size(); ++i) {
      sa_enc_.emplace_back(obs_dims_[i] + action_dims_[i], hidden, rng);
      s_enc_.emplace_back(obs_dims_[i], hidden, rng);
      head1_.emplace_back(2 * hidden, hidden, rng);
      head2_.emplace_back(hidden, action_dims_[i], rng);
    }
    for (int h = 0; h < heads; ++h) {
      key_.emplace_back(hidden, d, rng, false);
      sel_.emplace_back(hidden, d, rng, false);
      val_.emplace_back(hidden, d, rng);
    }
  }

  int n_agents() const { return static_cast<int>(obs_dims_.size()); }
  int heads() const { return heads_; }
  const std::vector<int>& action_dims() const { return action_dims_; }

  /// obs[i]: B x obs_i; actions[i]: B x A_i (one-hot rows, or any action
  /// encoding of that width).
  CriticOutput forward(const std::vector<Var>& obs, const std::vector<Var>& actions, bool keep_attention = false) const {
    const int n = n_agents();
    if (static_cast<int>(obs.size()) != n || static_cast<int>(actions.size()) != n)
      throw std::invalid_argument("AttentionCritic: expected " + std::to_string(n) + " agent slots");
    std::vector<Var> e(n), s(n);
    for (int i = 0; i < n; ++i) {
      e[i] = ad::leaky_relu(sa_enc_[i](ad::concat_cols<Scalar>({obs[i], actions[i]})));
      s[i] = ad::leaky_relu(s_enc_[i](obs[i]));
    }
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(hidden_ / heads_));
    std::vector<std::vector<Var>> keys(heads_), vals(heads_);
    for (int h = 0; h < heads_; ++h)
      for (int j = 0; j < n; ++j) {
        keys[h].push_back(key_[h](e[j]));
        vals[h].push_back(ad::leaky_relu(val_[h](e[j])));
      }

    CriticOutput out;
    out.attention.resize(keep_attention ? n : 0);
    std::vector<Var> reg_terms;
    for (int i = 0; i < n; ++i) {
      std::vector<Var> pooled{s[i]};
      for (int h = 0; h < heads_; ++h) {
        const Var q = sel_[h](s[i]);
        std::vector<Var> logits;
        std::vector<int> others;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          logits.push_back(ad::scale(ad::rowdot(q, keys[h][j]), inv_sqrt_d));
          others.push_back(j);
        }
        const Var logit_mat = ad::concat_cols(logits);
        reg_terms.push_back(ad::mean(ad::square(logit_mat)));
        const Var w = ad::softmax_rows(logit_mat);
        if (keep_attention) out.attention[i].push_back(w.value());
        Var acc;
        for (std::size_t k = 0; k < others.size(); ++k) {
          const Var term = ad::mul_col(vals[h][others[k]], ad::slice_cols(w, static_cast<Eigen::Index>(k), 1));
          acc = acc.defined() ? ad::add(acc, term) : term;
        }
        pooled.push_back(acc);
      }
      const Var hcat = ad::concat_cols(pooled);
      out.q_all.push_back(head2_[i](ad::leaky_relu(head1_[i](hcat))));
    }
    Var reg = reg_terms.front();
    for (std::size_t k = 1; k < reg_terms.size(); ++k) reg = ad::add(reg, reg_terms[k]);
    out.attention_reg = reg;
    return out;
  }

  AttentionCritic deep_copy() const {
    AttentionCritic c = *this;
    auto copy_all = [](std::vector<nn::Linear<Scalar>>& v) {
      for (auto& l : v) l = l.deep_copy();
    };
    copy_all(c.sa_enc_);
    copy_all(c.s_enc_);
    copy_all(c.head1_);
    copy_all(c.head2_);
    copy_all(c.key_);
    copy_all(c.sel_);
    copy_all(c.val_);
    return c;
  }

  Params parameters() const {
    Params p;
    for (const auto* v : {&sa_enc_, &s_enc_, &head1_, &head2_, &key_, &sel_, &val_})
      for (const auto& l : *v) l.collect(p);
    return p;
  }

 private:
  std::vector<int> obs_dims_;
  std::vector<int> action_dims_;
  int hidden_ = 0;
  int heads_ = 0;
  std::vector<nn::Linear<Scalar>> sa_enc_, s_enc_, head1_, head2_;  // per agent
  std::vector<nn::Linear<Scalar>> key_, sel_, val_;                 // per head, shared
};

}  // namespace mamt::nets
