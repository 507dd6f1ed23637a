#pragma once

// Joint-policy divergences over enumerable joint action spaces: exact
// enumeration, the sum-of-local-terms route for factored policies, KL of the
// opponents' marginal, and the chain-rule decomposition behind the
// opponents-average bound.

#include "mamt/divergence/distribution.hpp"

#include <cstdint>
#include <numeric>

namespace mamt::divergence {

inline constexpr std::int64_t kDefaultEnumerationCap = 1'000'000;

inline std::int64_t checked_product(std::span<const int> dims, std::int64_t cap) {
  std::int64_t total = 1;
  for (int d : dims) {
    if (d < 1) throw std::invalid_argument("joint space: empty factor");
    total *= d;
    if (total > cap)
      throw EnumerationLimit("joint action space exceeds the enumeration cap of " + std::to_string(cap));
  }
  return total;
}

/// Distribution over a product space, stored row-major (last factor fastest).
class JointDistribution {
 public:
  JointDistribution(std::vector<int> dims, std::vector<double> probs, std::int64_t cap = kDefaultEnumerationCap)
      : dims_(std::move(dims)), p_(std::move(probs)) {
    if (dims_.empty()) throw std::invalid_argument("JointDistribution: no factors");
    if (static_cast<std::int64_t>(p_.size()) != checked_product(dims_, cap))
      throw std::invalid_argument("JointDistribution: probability count does not match factor sizes");
    DiscreteDistribution check(p_);  // validates normalisation
    (void)check;
  }

  static JointDistribution product(std::span<const DiscreteDistribution> factors,
                                   std::int64_t cap = kDefaultEnumerationCap) {
    std::vector<int> dims;
    for (const auto& f : factors) dims.push_back(f.size());
    const auto total = checked_product(dims, cap);
    std::vector<double> p(static_cast<std::size_t>(total), 1.0);
    std::vector<int> idx(dims.size(), 0);
    for (std::int64_t flat = 0; flat < total; ++flat) {
      double v = 1.0;
      for (std::size_t k = 0; k < dims.size(); ++k) v *= factors[k][idx[k]];
      p[static_cast<std::size_t>(flat)] = v;
      advance(idx, dims);
    }
    // Renormalise away the rounding of long products.
    const double s = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& v : p) v /= s;
    return JointDistribution(std::move(dims), std::move(p), cap);
  }

  int n_factors() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  std::span<const double> probs() const { return p_; }

  /// Marginal over all factors except `excluded`.
  JointDistribution marginal_excluding(int excluded) const {
    if (excluded < 0 || excluded >= n_factors()) throw std::out_of_range("marginal_excluding: factor index");
    if (n_factors() == 1) throw std::invalid_argument("marginal_excluding: no factors would remain");
    std::vector<int> rest;
    for (int k = 0; k < n_factors(); ++k)
      if (k != excluded) rest.push_back(dims_[k]);
    const auto total = std::accumulate(rest.begin(), rest.end(), std::int64_t{1}, std::multiplies<>());
    std::vector<double> m(static_cast<std::size_t>(total), 0.0);
    std::vector<int> idx(dims_.size(), 0);
    for (std::size_t flat = 0; flat < p_.size(); ++flat) {
      std::int64_t r = 0;
      for (int k = 0; k < n_factors(); ++k)
        if (k != excluded) r = r * dims_[k] + idx[k];
      m[static_cast<std::size_t>(r)] += p_[flat];
      advance(idx, dims_);
    }
    return JointDistribution(std::move(rest), std::move(m));
  }

 private:
  static void advance(std::vector<int>& idx, const std::vector<int>& dims) {
    for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
      if (++idx[k] < dims[k]) return;
      idx[k] = 0;
    }
  }

  std::vector<int> dims_;
  std::vector<double> p_;
};

inline double kl(const JointDistribution& p, const JointDistribution& q) {
  if (p.dims() != q.dims()) throw DivergenceUndefined("kl: joint distributions live on different product spaces");
  return kl(p.probs(), q.probs());
}

/// Chain-rule split of KL(P || Q) around factor i:
/// KL(P || Q) = KL(P_-i || Q_-i) + E_{P_-i}[ KL(P_i|-i || Q_i|-i) ].
struct ChainTerms {
  double others = 0.0;
  double conditional = 0.0;
};

inline ChainTerms chain_decomposition(const JointDistribution& p, const JointDistribution& q, int i) {
  if (p.dims() != q.dims()) throw DivergenceUndefined("chain_decomposition: different product spaces");
  const auto pm = p.marginal_excluding(i);
  const auto qm = q.marginal_excluding(i);
  ChainTerms t;
  t.others = kl(pm, qm);

  // Group joint cells by their others-index and accumulate the conditional KL.
  const auto& dims = p.dims();
  std::vector<int> idx(dims.size(), 0);
  const auto pp = p.probs();
  const auto qp = q.probs();
  const auto pmp = pm.probs();
  const auto qmp = qm.probs();
  for (std::size_t flat = 0; flat < pp.size(); ++flat) {
    std::int64_t r = 0;
    for (std::size_t k = 0; k < dims.size(); ++k)
      if (static_cast<int>(k) != i) r = r * dims[k] + idx[k];
    const double pj = pp[flat];
    if (pj > 0.0) {
      const double pc = pj / pmp[static_cast<std::size_t>(r)];
      const double qmarg = qmp[static_cast<std::size_t>(r)];
      if (qp[flat] <= 0.0 || qmarg <= 0.0) throw DivergenceUndefined("chain_decomposition: q vanishes where p > 0");
      const double qc = qp[flat] / qmarg;
      t.conditional += pj * std::log(pc / qc);
    }
    for (int k = static_cast<int>(dims.size()) - 1; k >= 0; --k) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return t;
}

/// KL(P || Q) - (1/n) sum_i KL(P_-i || Q_-i); non-negative by the chain rule.
inline double verify_theorem2(const JointDistribution& p, const JointDistribution& q) {
  const int n = p.n_factors();
  if (n < 2) throw std::invalid_argument("verify_theorem2: need at least two agents");
  const double joint = kl(p, q);
  double others = 0.0;
  for (int i = 0; i < n; ++i) others += kl(p.marginal_excluding(i), q.marginal_excluding(i));
  return joint - others / n;
}

/// Per-agent tabular policy over a finite local observation set.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  explicit TabularPolicy(std::vector<DiscreteDistribution> rows) : rows_(std::move(rows)) {
    if (rows_.empty()) throw std::invalid_argument("TabularPolicy: no observations");
    for (const auto& r : rows_)
      if (r.size() != rows_.front().size()) throw std::invalid_argument("TabularPolicy: ragged action sets");
  }

  int n_observations() const { return static_cast<int>(rows_.size()); }
  int n_actions() const { return rows_.front().size(); }
  const DiscreteDistribution& at(int obs) const {
    if (obs < 0 || obs >= n_observations()) throw std::out_of_range("TabularPolicy: observation index");
    return rows_[static_cast<std::size_t>(obs)];
  }

 private:
  std::vector<DiscreteDistribution> rows_;
};

using JointPolicy = std::vector<TabularPolicy>;
using JointObservationIndex = std::vector<int>;  // one local observation index per agent

struct WeightedObservation {
  JointObservationIndex obs;
  double weight = 1.0;
};

inline void check_pair(const JointPolicy& pi, const JointPolicy& old) {
  if (pi.size() != old.size()) throw std::invalid_argument("joint policies have different agent counts");
  if (pi.empty()) throw std::invalid_argument("joint policy has no agents");
}

inline JointDistribution joint_action_distribution(const JointPolicy& pi, const JointObservationIndex& o,
                                                   std::int64_t cap = kDefaultEnumerationCap) {
  if (o.size() != pi.size()) throw std::invalid_argument("joint observation has the wrong agent count");
  std::vector<DiscreteDistribution> f;
  for (std::size_t i = 0; i < pi.size(); ++i) f.push_back(pi[i].at(o[i]));
  return JointDistribution::product(f, cap);
}

/// KL between the two joint action distributions at one joint observation,
/// by full enumeration of joint actions.
inline double joint_kl_exact(const JointPolicy& pi, const JointPolicy& old, const JointObservationIndex& o,
                             std::int64_t cap = kDefaultEnumerationCap) {
  check_pair(pi, old);
  return kl(joint_action_distribution(pi, o, cap), joint_action_distribution(old, o, cap));
}

inline double normalised_weight_sum(std::span<const WeightedObservation> batch) {
  if (batch.empty()) throw std::invalid_argument("empty observation batch");
  double w = 0.0;
  for (const auto& b : batch) {
    if (!(b.weight >= 0.0)) throw std::invalid_argument("negative observation weight");
    w += b.weight;
  }
  if (w <= 0.0) throw std::invalid_argument("observation weights sum to zero");
  return w;
}

/// Weighted expectation of joint_kl_exact over a batch of joint observations.
inline double joint_kl_exact(const JointPolicy& pi, const JointPolicy& old, std::span<const WeightedObservation> batch,
                             std::int64_t cap = kDefaultEnumerationCap) {
  const double w = normalised_weight_sum(batch);
  double s = 0.0;
  for (const auto& b : batch) s += b.weight * joint_kl_exact(pi, old, b.obs, cap);
  return s / w;
}

/// sum_i E_{o_i}[ KL(pi_i(.|o_i) || old_i(.|o_i)) ] using only local terms.
inline double joint_kl_meanfield(const JointPolicy& pi, const JointPolicy& old,
                                 std::span<const WeightedObservation> batch) {
  check_pair(pi, old);
  const double w = normalised_weight_sum(batch);
  double total = 0.0;
  for (std::size_t i = 0; i < pi.size(); ++i) {
    double s = 0.0;
    for (const auto& b : batch) {
      if (b.obs.size() != pi.size()) throw std::invalid_argument("joint observation has the wrong agent count");
      s += b.weight * kl(pi[i].at(b.obs[i]), old[i].at(b.obs[i]));
    }
    total += s / w;
  }
  return total;
}

/// KL of the joint policy of every agent except `excluded`; 0 for one agent.
inline double others_joint_kl(const JointPolicy& pi, const JointPolicy& old, const JointObservationIndex& o,
                              int excluded, std::int64_t cap = kDefaultEnumerationCap) {
  check_pair(pi, old);
  const int n = static_cast<int>(pi.size());
  if (excluded < 0 || excluded >= n) throw std::out_of_range("others_joint_kl: agent index");
  if (n == 1) return 0.0;
  JointPolicy a, b;
  JointObservationIndex oo;
  for (int k = 0; k < n; ++k) {
    if (k == excluded) continue;
    a.push_back(pi[k]);
    b.push_back(old[k]);
    oo.push_back(o[k]);
  }
  return joint_kl_exact(a, b, oo, cap);
}

}  // namespace mamt::divergence
