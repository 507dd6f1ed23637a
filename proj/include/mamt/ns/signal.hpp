#pragma once

// Non-stationarity surrogate: coordination-weighted divergence between each
// agent's opponent models and the opponents' actual policies, plus the
// supervised losses that fit the modeling nets and the divergence network.

#include "mamt/coord/coordination.hpp"
#include "mamt/nets/modeling.hpp"

#include <algorithm>

namespace mamt::ns {

using nets::Mat;
using nets::Var;

inline constexpr double kDefaultCap = 10.0;

struct NonstationaritySignal {
  std::vector<double> local;  // per-agent D_i in [0, cap]
  double system = 0.0;        // sum of local
};

inline double project(double v, double cap = kDefaultCap) { return std::clamp(v, 0.0, cap); }

inline double system_ns(std::span<const double> local) {
  double s = 0.0;
  for (double v : local) s += v;
  return s;
}

/// Batch-mean KL(model(i->j)(o_i) || pi_j(o_j)) for every ordered pair; diagonal 0.
inline Mat pairwise_model_kl(const nets::ModelingNets& models, const std::vector<nets::Policy>& policies,
                             const std::vector<Mat>& obs) {
  ad::NoGradGuard guard;
  const int n = models.n_agents();
  Mat kl = Mat::Zero(n, n);
  std::vector<Mat> pi(n);
  for (int j = 0; j < n; ++j) pi[j] = policies[j].probs_value(obs[j]);
  for (int i = 0; i < n; ++i) {
    const Var oi = ad::constant<nets::Scalar>(obs[i]);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Mat h = models.probs(i, j, oi).value();
      kl(i, j) = (h.array() * (h.array().log() - pi[j].array().log())).sum() / static_cast<double>(h.rows());
    }
  }
  return kl;
}

/// D_i = clamp(sum_j C_ij * KL_ij, 0, cap).
inline double local_ns(int i, const Mat& coord_post, const Mat& pair_kl, double cap = kDefaultCap) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < coord_post.cols(); ++j)
    if (j != i) s += coord_post(i, j) * pair_kl(i, j);
  return project(s, cap);
}

inline NonstationaritySignal signal(const Mat& coord_post, const Mat& pair_kl, double cap = kDefaultCap) {
  NonstationaritySignal s;
  for (Eigen::Index i = 0; i < coord_post.rows(); ++i) s.local.push_back(local_ns(static_cast<int>(i), coord_post, pair_kl, cap));
  s.system = system_ns(s.local);
  return s;
}

/// Sum over ordered pairs of the mean cross-entropy against executed actions,
/// plus coef * mean squared logits per pair.
inline Var modeling_loss(const nets::ModelingNets& models, const std::vector<Mat>& obs,
                         const std::vector<std::vector<int>>& actions, double reg_coef) {
  const int n = models.n_agents();
  Var total;
  for (int i = 0; i < n; ++i) {
    const Var oi = ad::constant<nets::Scalar>(obs[i]);
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const Var logits = models.logits(i, j, oi);
      const Var logp = ad::log(nets::floor_probs(ad::softmax_rows(logits)));
      Var term = ad::scale(ad::mean(ad::gather_cols(logp, std::span<const int>(actions[j]))), -1.0);
      if (reg_coef > 0.0) term = ad::add(term, ad::scale(ad::mean(ad::square(logits)), reg_coef));
      total = total.defined() ? ad::add(total, term) : term;
    }
  }
  return total;
}

/// (sum KL_hat - sum D)^2 + aux * sum_i (KL_hat_i - D_i)^2 with KL_hat as 1 x n.
inline Var ns_regression_loss(const Var& kl_hat, std::span<const double> d, double aux_weight = 0.1) {
  if (kl_hat.rows() != 1 || kl_hat.cols() != static_cast<Eigen::Index>(d.size()))
    throw std::invalid_argument("ns_regression_loss: estimate and signal lengths differ");
  Mat dm(1, static_cast<Eigen::Index>(d.size()));
  for (std::size_t k = 0; k < d.size(); ++k) dm(0, static_cast<Eigen::Index>(k)) = d[k];
  const Var gap = ad::add_scalar(ad::sum(kl_hat), -dm.sum());
  Var loss = ad::square(gap);
  if (aux_weight > 0.0)
    loss = ad::add(loss, ad::scale(ad::sum(ad::square(ad::sub(kl_hat, ad::constant<nets::Scalar>(dm)))), aux_weight));
  return loss;
}

}  // namespace mamt::ns
