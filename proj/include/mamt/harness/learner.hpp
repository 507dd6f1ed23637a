#pragma once

// One learner owning every parameter set of a run. update() performs a
// single iteration on one minibatch: (MAMT only) opponent models,
// coordination, non-stationarity signal, trust-region step and divergence
// network steps; then critic, actor, target networks.

#include "mamt/bilevel/bilevel.hpp"
#include "mamt/coord/coordination.hpp"
#include "mamt/env/posg.hpp"
#include "mamt/harness/config.hpp"
#include "mamt/mamd/losses.hpp"
#include "mamt/nets/modeling.hpp"
#include "mamt/ns/signal.hpp"
#include "mamt/trdn/network.hpp"

#include <cmath>
#include <numeric>
#include <optional>

namespace mamt::harness {

using nets::Mat;
using nets::Var;

struct UpdateRecord {
  long iteration = 0;
  bool refreshed = false;
  double critic_mse = 0.0;
  std::vector<double> policy_kl;  // exact batch-mean KL(pi_i || pi_i_old), before the actor step
  std::vector<double> epsilon;
  // Divergence-network quantities, present for mamt only.
  bool has_mamt = false;
  Mat coord_pre, coord_post;
  std::vector<double> d_ns;
  double d_ns_system = 0.0;
  std::vector<double> kl_hat;
  double l_ns = 0.0;
  double modeling_loss = 0.0;
  double objective_f = 0.0;
};

/// Per-agent trust-region sizes implied by the algorithm.
inline std::vector<double> initial_epsilon(Algorithm alg, const RunSettings& s, const env::CouplingGraph& g) {
  const int n = g.size();
  switch (alg) {
    case Algorithm::Baseline:
      return std::vector<double>(static_cast<std::size_t>(n), mamd::kUnbounded);
    case Algorithm::Mamd:
      return mamd::MamdConfig::uniform_split(s.epsilon_total, n);
    case Algorithm::MamdOp: {
      // Coupled agents keep the uniform share; agents with no coupling are unconstrained.
      std::vector<double> e(static_cast<std::size_t>(n), mamd::kUnbounded);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (i != j && g.coupled(i, j)) e[i] = s.epsilon_total / n;
      return e;
    }
    case Algorithm::Mamt:
      return std::vector<double>(static_cast<std::size_t>(n), std::clamp(s.epsilon_init, s.eps_min, s.eps_max));
  }
  return {};
}

class Learner {
 public:
  Learner(const RunSettings& s, const env::PosgSpec& spec, const env::CouplingGraph& coupling, std::uint64_t seed)
      : s_(s), n_(spec.n_agents), rng_(seed * 0x9E3779B97F4A7C15ULL + 1), mamt_rng_(seed * 0xBF58476D1CE4E5B9ULL + 7) {
    for (int i = 0; i < n_; ++i) {
      obs_dims_.push_back(spec.observation_spaces[i].dim);
      action_dims_.push_back(spec.action_spaces[i]);
    }
    nn::Rng init(seed);
    std::vector<nets::Policy> pols;
    for (int i = 0; i < n_; ++i) pols.emplace_back(obs_dims_[i], action_dims_[i], s.hidden, init);
    nets::AttentionCritic critic(obs_dims_, action_dims_, s.hidden, s.heads, init);
    snap_ = nets::PolicySnapshot::create(std::move(pols), std::move(critic));

    const ad::AdamOptions opt{s.lr, s.adam_mom, 0.999, s.adam_eps, s.lr_decay};
    critic_opt_ = ad::Adam<nets::Scalar>(snap_.critic.parameters(), opt);
    for (int i = 0; i < n_; ++i) policy_opt_.emplace_back(snap_.behavior[i].parameters(), opt);

    eps_.eps = initial_epsilon(s.algorithm, s, coupling);
    eps_.lo = s.eps_min;
    eps_.hi = s.eps_max;

    if (s.algorithm == Algorithm::Mamt) {
      for (int i = 1; i < n_; ++i)
        if (obs_dims_[i] != obs_dims_[0] || action_dims_[i] != action_dims_[0])
          throw ConfigError("mamt needs identical observation and action spaces across agents");
      nn::Rng minit(seed ^ 0xA5A5A5A5A5A5A5A5ULL);
      models_ = nets::ModelingNets(obs_dims_, action_dims_, s.hidden, minit);
      trdn_ = trdn::Trdn(obs_dims_[0], action_dims_[0], trdn::TrdnOptions{s.hidden, s.eps_embedding, s.trdn_rounds}, minit);
      model_opt_ = ad::Adam<nets::Scalar>(models_.parameters(), opt);
      trdn_opt_ = ad::Adam<nets::Scalar>(trdn_.parameters(), opt);
    }
  }

  int n_agents() const { return n_; }
  long iteration() const { return iteration_; }
  const std::vector<double>& epsilon() const { return eps_.eps; }
  const RunSettings& settings() const { return s_; }
  const nets::PolicySnapshot& snapshot() const { return snap_; }
  nets::PolicySnapshot& snapshot() { return snap_; }
  const nets::ModelingNets& models() const { return models_; }
  const trdn::Trdn& divergence_net() const { return trdn_; }
  double alpha() const { return 1.0 / s_.soft_reward_scale; }

  /// Samples (or, greedy, picks the mode of) each agent's action in each
  /// environment. obs[e][i] is agent i's observation in environment e.
  std::vector<std::vector<int>> act(const std::vector<env::JointObservation>& obs, nn::Rng& rng, bool greedy) const {
    const auto envs = static_cast<Eigen::Index>(obs.size());
    std::vector<std::vector<int>> out(obs.size(), std::vector<int>(static_cast<std::size_t>(n_)));
    for (int i = 0; i < n_; ++i) {
      Mat o(envs, obs_dims_[i]);
      for (Eigen::Index e = 0; e < envs; ++e)
        for (int c = 0; c < obs_dims_[i]; ++c) o(e, c) = obs[static_cast<std::size_t>(e)][i][c];
      const Mat p = snap_.behavior[i].probs_value(o);
      for (Eigen::Index e = 0; e < envs; ++e)
        out[static_cast<std::size_t>(e)][i] = greedy ? nets::argmax(p.row(e)) : nets::sample_categorical(p.row(e), rng);
    }
    return out;
  }

  UpdateRecord update(const mamd::Batch& batch) {
    batch.validate();
    UpdateRecord rec;
    rec.iteration = iteration_;
    rec.refreshed = nets::mirror_descent_tick(iteration_, snap_, s_.delay);

    std::vector<Mat> pi(n_), pi_old(n_);
    for (int i = 0; i < n_; ++i) {
      pi[i] = snap_.behavior[i].probs_value(batch.obs[i]);
      pi_old[i] = snap_.old[i].probs_value(batch.obs[i]);
      rec.policy_kl.push_back(mamd::mean_policy_kl(pi[i], pi_old[i]));
    }

    if (s_.algorithm == Algorithm::Mamt) mamt_step(batch, pi, rec);
    rec.epsilon = eps_.eps;

    critic_step(batch, rec);
    actor_step(batch);
    snap_.update_targets(nets::TargetMode::Soft, s_.target_tau);
    ++iteration_;
    return rec;
  }

  // Checkpoint plumbing.
  struct NamedParams {
    std::string name;
    nets::Params params;
  };

  std::vector<NamedParams> parameter_sets() {
    std::vector<NamedParams> v;
    for (int i = 0; i < n_; ++i) {
      v.push_back({"policy/" + std::to_string(i), snap_.behavior[i].parameters()});
      v.push_back({"target_policy/" + std::to_string(i), snap_.target[i].parameters()});
      v.push_back({"old_policy/" + std::to_string(i), snap_.old[i].parameters()});
    }
    v.push_back({"critic", snap_.critic.parameters()});
    v.push_back({"target_critic", snap_.target_critic.parameters()});
    if (s_.algorithm == Algorithm::Mamt) {
      v.push_back({"modeling", models_.parameters()});
      v.push_back({"trdn", trdn_.parameters()});
    }
    return v;
  }

  void restore_counters(long iteration, std::vector<double> eps) {
    if (static_cast<int>(eps.size()) != n_) throw std::invalid_argument("restore_counters: epsilon size");
    iteration_ = iteration;
    eps_.eps = std::move(eps);
  }

 private:
  void mamt_step(const mamd::Batch& batch, const std::vector<Mat>& pi, UpdateRecord& rec) {
    rec.has_mamt = true;
    const double n = static_cast<double>(n_);

    // Opponent models: one supervised step on the batch.
    model_opt_.zero_grad();
    const Var ml = ns::modeling_loss(models_, batch.obs, batch.actions, s_.modeling_reg);
    rec.modeling_loss = ml.item();
    ad::backward(ml);
    ad::clip_grad_norm(model_opt_.params(), s_.modeling_clip);
    model_opt_.step();

    // Coordination on the whole batch or a sub-sample of it.
    std::vector<Mat> cobs = batch.obs;
    std::vector<std::vector<int>> cact = batch.actions;
    std::vector<Mat> cpi = pi;
    if (s_.coord_sample_size > 0 && s_.coord_sample_size < batch.size()) {
      std::vector<long> idx(static_cast<std::size_t>(batch.size()));
      std::iota(idx.begin(), idx.end(), 0L);
      std::shuffle(idx.begin(), idx.end(), mamt_rng_);
      idx.resize(static_cast<std::size_t>(s_.coord_sample_size));
      for (int i = 0; i < n_; ++i) {
        Mat o(static_cast<Eigen::Index>(idx.size()), cobs[i].cols()), p(static_cast<Eigen::Index>(idx.size()), cpi[i].cols());
        std::vector<int> a;
        for (std::size_t r = 0; r < idx.size(); ++r) {
          o.row(static_cast<Eigen::Index>(r)) = batch.obs[i].row(idx[r]);
          p.row(static_cast<Eigen::Index>(r)) = pi[i].row(idx[r]);
          a.push_back(batch.actions[i][static_cast<std::size_t>(idx[r])]);
        }
        cobs[i] = std::move(o);
        cpi[i] = std::move(p);
        cact[i] = std::move(a);
      }
    }
    const auto c = coord::coordination_coefficients(snap_.critic, cobs, cact, cpi, s_.coord_delta);
    rec.coord_pre = c.pre;
    rec.coord_post = c.post;
    const Mat w = c.symmetric();

    const auto sig = ns::signal(c.post, ns::pairwise_model_kl(models_, snap_.behavior, batch.obs), s_.ns_cap);
    rec.d_ns = sig.local;
    rec.d_ns_system = sig.system;

    std::vector<Mat> onehot;
    for (int i = 0; i < n_; ++i) onehot.push_back(nets::one_hot(batch.actions[i], action_dims_[i]));

    // Slow step on the trust-region sizes.
    if (s_.update_epsilon) {
      const auto ga = bilevel::actor_path_gradient(rec.policy_kl, eps_.eps);
      const auto gt = bilevel::trdn_path_gradient(trdn_, batch.obs, onehot, eps_.eps, w);
      std::vector<double> g(ga.size());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = ga[i] + gt[i];
      eps_ = bilevel::epsilon_update(eps_, g, s_.lr);
    }

    // Fast steps on the divergence network.
    const auto fr = bilevel::trdn_update(trdn_, trdn_opt_, batch.obs, onehot, eps_.eps, w, sig.local, s_.k_fast,
                                         s_.trdn_clip_per_agent * n, s_.ns_aux_weight);
    rec.l_ns = fr.loss_last;
    {
      ad::NoGradGuard g;
      const Var kh = trdn_.forward(batch.obs, onehot, ad::constant<nets::Scalar>(trdn::epsilon_leaf(eps_.eps).value()), w);
      for (int i = 0; i < n_; ++i) rec.kl_hat.push_back(kh.value()(0, i));
      double value = 0.0;
      const auto q = snap_.critic.forward(mamd::constants(batch.obs), mamd::constants(onehot));
      for (int i = 0; i < n_; ++i) value += mamd::counterfactual_baseline(q.q_all[i].value(), pi[i]).mean();
      rec.objective_f = bilevel::objective_F(value, kh).item();
    }
  }

  void critic_step(const mamd::Batch& batch, UpdateRecord& rec) {
    const auto y = mamd::critic_targets(batch, snap_, s_.discount, alpha(), rng_);
    critic_opt_.zero_grad();
    // The attention penalty carries a base weight of 1e-3 scaled by the configured coefficient.
    const auto loss = mamd::critic_loss(snap_.critic, batch, y, s_.critic_reg * 1e-3);
    rec.critic_mse = loss.mse;
    ad::backward(loss.total);
    ad::clip_grad_norm(critic_opt_.params(), s_.critic_clip_per_agent * n_);
    critic_opt_.step();
  }

  void actor_step(const mamd::Batch& batch) {
    const auto b = static_cast<std::size_t>(batch.size());
    std::vector<std::vector<int>> acts(static_cast<std::size_t>(n_), std::vector<int>(b));
    std::vector<Mat> pi(n_), logp(n_), logp_old(n_);
    std::vector<Var> onehot;
    {
      ad::NoGradGuard g;
      for (int i = 0; i < n_; ++i) {
        const Var o = ad::constant<nets::Scalar>(batch.obs[i]);
        pi[i] = snap_.behavior[i].probs(o).value();
        logp[i] = pi[i].array().log().matrix();
        logp_old[i] = snap_.old[i].log_probs(o).value();
        for (std::size_t r = 0; r < b; ++r) acts[i][r] = nets::sample_categorical(pi[i].row(static_cast<Eigen::Index>(r)), rng_);
        onehot.push_back(ad::constant<nets::Scalar>(nets::one_hot(acts[i], action_dims_[i])));
      }
    }
    std::vector<Mat> q_all(n_);
    {
      ad::NoGradGuard g;
      const auto q = snap_.critic.forward(mamd::constants(batch.obs), onehot);
      for (int i = 0; i < n_; ++i) q_all[i] = q.q_all[i].value();
    }
    const bool penalised = s_.algorithm != Algorithm::Baseline;
    for (int i = 0; i < n_; ++i) {
      const auto t = mamd::actor_terms(q_all[i], pi[i], logp[i], logp_old[i], acts[i], eps_.eps[i], alpha(), penalised);
      auto& opt = policy_opt_[static_cast<std::size_t>(i)];
      opt.zero_grad();
      Var loss = mamd::actor_surrogate(snap_.behavior[i], batch.obs[i], acts[i], t.multiplier);
      loss = ad::add(loss, mamd::logits_penalty(snap_.behavior[i], batch.obs[i], s_.policy_reg));
      ad::backward(loss);
      ad::clip_grad_norm(opt.params(), s_.policy_clip);
      opt.step();
    }
  }

  RunSettings s_;
  int n_;
  std::vector<int> obs_dims_, action_dims_;
  nn::Rng rng_;
  nn::Rng mamt_rng_;
  nets::PolicySnapshot snap_;
  ad::Adam<nets::Scalar> critic_opt_;
  std::vector<ad::Adam<nets::Scalar>> policy_opt_;
  bilevel::TrustRegionAllocation eps_;
  long iteration_ = 0;

  nets::ModelingNets models_;
  trdn::Trdn trdn_;
  ad::Adam<nets::Scalar> model_opt_;
  ad::Adam<nets::Scalar> trdn_opt_;
};

}  // namespace mamt::harness
