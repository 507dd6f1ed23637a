#pragma once

// Critic regression, counterfactual baseline and the mirror-descent actor
// surrogate.

#include "mamt/mamd/batch.hpp"
#include "mamt/mamd/config.hpp"
#include "mamt/nets/snapshot.hpp"

#include <cmath>

namespace mamt::mamd {

/// y = r + gamma (1 - done) (q_next - alpha * logp_next).
inline double critic_target_value(double reward, bool done, double discount, double q_next, double logp_next,
                                  double alpha) {
  if (done) return reward;
  return reward + discount * (q_next - alpha * logp_next);
}

/// Per-agent regression targets (B x 1). One next joint action is sampled
/// from the target policies per transition.
inline std::vector<Mat> critic_targets(const Batch& batch, const nets::PolicySnapshot& snap, double discount,
                                       double alpha, nn::Rng& rng) {
  batch.validate();
  ad::NoGradGuard guard;
  const int n = batch.n_agents();
  const int b = batch.size();
  std::vector<Var> next_obs = constants(batch.next_obs);
  std::vector<std::vector<int>> next_actions(n, std::vector<int>(static_cast<std::size_t>(b)));
  std::vector<Var> next_onehot;
  for (int i = 0; i < n; ++i) {
    const Mat p = snap.target[i].probs(next_obs[i]).value();
    for (int r = 0; r < b; ++r) next_actions[i][r] = nets::sample_categorical(p.row(r), rng);
    next_onehot.push_back(ad::constant<nets::Scalar>(nets::one_hot(next_actions[i], p.cols())));
  }
  const auto q = snap.target_critic.forward(next_obs, next_onehot);
  std::vector<Mat> y;
  for (int i = 0; i < n; ++i) {
    const Mat logp = snap.behavior[i].log_probs(next_obs[i]).value();
    Mat yi(b, 1);
    for (int r = 0; r < b; ++r) {
      const int a = next_actions[i][r];
      yi(r, 0) = critic_target_value(batch.rewards[i](r, 0), batch.dones[i](r, 0) > 0.5, discount,
                                     q.q_all[i].value()(r, a), logp(r, a), alpha);
    }
    y.push_back(std::move(yi));
  }
  return y;
}

struct CriticLoss {
  Var total;           // mse + reg
  double mse = 0.0;    // sum over agents of the mean squared error
};

/// Sum over agents of mean (Q_i(o, a) - y_i)^2, plus an attention-logit penalty.
inline CriticLoss critic_loss(const nets::AttentionCritic& critic, const Batch& batch, const std::vector<Mat>& targets,
                              double reg_coef) {
  batch.validate();
  const int n = batch.n_agents();
  if (static_cast<int>(targets.size()) != n) throw std::invalid_argument("critic_loss: one target per agent");
  std::vector<Var> acts;
  for (int i = 0; i < n; ++i)
    acts.push_back(ad::constant<nets::Scalar>(nets::one_hot(batch.actions[i], critic.action_dims()[i])));
  const auto out = critic.forward(constants(batch.obs), acts);
  Var total;
  for (int i = 0; i < n; ++i) {
    const Var qi = ad::gather_cols(out.q_all[i], std::span<const int>(batch.actions[i]));
    const Var err = ad::mean(ad::square(ad::sub(qi, ad::constant<nets::Scalar>(targets[i]))));
    total = total.defined() ? ad::add(total, err) : err;
  }
  CriticLoss res;
  res.mse = total.item();
  res.total = reg_coef > 0.0 ? ad::add(total, ad::scale(out.attention_reg, reg_coef)) : total;
  return res;
}

/// b = sum_a pi(a) Q(a), row-wise over B x A inputs.
inline Mat counterfactual_baseline(const Mat& q_all, const Mat& pi) {
  if (q_all.rows() != pi.rows() || q_all.cols() != pi.cols())
    throw std::invalid_argument("counterfactual_baseline: shape mismatch");
  return q_all.cwiseProduct(pi).rowwise().sum();
}

/// mean_b log pi(a_b | o_b) * multiplier_b, with the multiplier held fixed.
/// Its gradient is the sample policy-gradient estimate for that multiplier.
inline Var actor_surrogate(const nets::Policy& policy, const Mat& obs, std::span<const int> actions,
                           const Mat& multiplier) {
  const Var logp = ad::gather_cols(policy.log_probs(ad::constant<nets::Scalar>(obs)), actions);
  return ad::mean(ad::mul(logp, ad::constant<nets::Scalar>(multiplier)));
}

struct ActorTerms {
  Mat multiplier;     // B x 1, (log-ratio / eps + alpha log pi) - (Q - b)
  Mat advantage;      // B x 1, Q - b
  Mat log_ratio;      // B x 1, log pi - log pi_old at the sampled action
};

/// Builds the per-sample multiplier of the actor gradient. A non-finite
/// `epsilon` or `with_penalty == false` leaves out the divergence term.
inline ActorTerms actor_terms(const Mat& q_all, const Mat& pi, const Mat& logp, const Mat& logp_old,
                              std::span<const int> actions, double epsilon, double alpha, bool with_penalty) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("actor_terms: trust-region size must be positive");
  const auto b = q_all.rows();
  ActorTerms t;
  const Mat base = counterfactual_baseline(q_all, pi);
  t.multiplier.resize(b, 1);
  t.advantage.resize(b, 1);
  t.log_ratio.resize(b, 1);
  for (Eigen::Index r = 0; r < b; ++r) {
    const int a = actions[static_cast<std::size_t>(r)];
    const double adv = q_all(r, a) - base(r, 0);
    const double ratio = logp(r, a) - logp_old(r, a);
    const double ent = alpha * logp(r, a);
    t.advantage(r, 0) = adv;
    t.log_ratio(r, 0) = ratio;
    t.multiplier(r, 0) = with_penalty ? (ratio / epsilon + ent) - adv : ent - adv;
  }
  return t;
}

/// Batch mean of the exact KL(pi || pi_old) over the action set.
inline double mean_policy_kl(const Mat& pi, const Mat& pi_old) {
  if (pi.rows() != pi_old.rows() || pi.cols() != pi_old.cols())
    throw std::invalid_argument("mean_policy_kl: shape mismatch");
  return (pi.array() * (pi.array().log() - pi_old.array().log())).sum() / static_cast<double>(pi.rows());
}

/// Policy logits penalty coefficient * mean(logits^2).
inline Var logits_penalty(const nets::Policy& policy, const Mat& obs, double coef) {
  return ad::scale(ad::mean(ad::square(policy.logits(ad::constant<nets::Scalar>(obs)))), coef);
}

}  // namespace mamt::mamd
