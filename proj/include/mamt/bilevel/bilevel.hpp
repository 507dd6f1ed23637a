#pragma once

// Slow update of the per-agent trust-region sizes against the objective
// F(eps) = E[sum_i V_i] - sum_i KL_hat_i(eps), and the fast descent steps on
// the divergence network that track the non-stationarity signal.

#include "mamt/ns/signal.hpp"
#include "mamt/trdn/network.hpp"

#include <algorithm>

namespace mamt::bilevel {

using nets::Mat;
using nets::Var;

inline constexpr double kEpsMin = 0.01;
inline constexpr double kEpsMax = 100.0;

struct TrustRegionAllocation {
  std::vector<double> eps;
  double lo = kEpsMin;
  double hi = kEpsMax;

  static TrustRegionAllocation uniform(int n, double value = 1.0) {
    TrustRegionAllocation a;
    a.eps.assign(static_cast<std::size_t>(n), value);
    a.clip();
    return a;
  }

  void clip() {
    for (double& e : eps) e = std::clamp(e, lo, hi);
  }

  bool within_bounds() const {
    return std::all_of(eps.begin(), eps.end(), [&](double e) { return e >= lo && e <= hi; });
  }
};

/// F = value - sum(KL_hat); `value` is treated as constant in eps.
inline Var objective_F(double value, const Var& kl_hat) { return ad::add_scalar(ad::scale(ad::sum(kl_hat), -1.0), value); }

/// d/d eps_i of the actor's penalty term -KL_i / eps_i, i.e. KL_i / eps_i^2.
inline std::vector<double> actor_path_gradient(std::span<const double> mean_kl, std::span<const double> eps) {
  if (mean_kl.size() != eps.size()) throw std::invalid_argument("actor_path_gradient: size mismatch");
  std::vector<double> g(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) g[i] = mean_kl[i] / (eps[i] * eps[i]);
  return g;
}

/// d F / d eps through the divergence network only: -d sum(KL_hat) / d eps.
inline std::vector<double> trdn_path_gradient(const trdn::Trdn& net, const std::vector<Mat>& obs,
                                              const std::vector<Mat>& actions, std::span<const double> eps,
                                              const Mat& weights) {
  const Var leaf = trdn::epsilon_leaf(eps);
  const Var f = objective_F(0.0, net.forward(obs, actions, leaf, weights));
  ad::backward(f);
  std::vector<double> g(eps.size());
  for (std::size_t i = 0; i < eps.size(); ++i) g[i] = leaf.grad()(0, static_cast<Eigen::Index>(i));
  // Parameter gradients accumulated by this pass are not wanted.
  auto params = net.parameters();
  ad::zero_grad(params);
  return g;
}

/// eps <- clip(eps + step * grad_F), ascent on F.
inline TrustRegionAllocation epsilon_update(TrustRegionAllocation a, std::span<const double> grad_f, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("epsilon_update: step must be positive");
  if (grad_f.size() != a.eps.size()) throw std::invalid_argument("epsilon_update: gradient size mismatch");
  for (std::size_t i = 0; i < a.eps.size(); ++i) a.eps[i] += step * grad_f[i];
  a.clip();
  return a;
}

struct FastStepResult {
  double loss_first = 0.0;
  double loss_last = 0.0;
};

/// k_fast descent steps on the regression loss of the divergence network.
inline FastStepResult trdn_update(trdn::Trdn& net, ad::Adam<nets::Scalar>& opt, const std::vector<Mat>& obs,
                                  const std::vector<Mat>& actions, std::span<const double> eps, const Mat& weights,
                                  std::span<const double> signal, int k_fast, double clip, double aux_weight = 0.1) {
  if (k_fast < 1) throw std::invalid_argument("trdn_update: need at least one fast step");
  FastStepResult r;
  const Var eps_const = ad::constant<nets::Scalar>(trdn::epsilon_leaf(eps).value());
  for (int k = 0; k < k_fast; ++k) {
    opt.zero_grad();
    const Var loss = ns::ns_regression_loss(net.forward(obs, actions, eps_const, weights), signal, aux_weight);
    if (k == 0) r.loss_first = loss.item();
    r.loss_last = loss.item();
    ad::backward(loss);
    ad::clip_grad_norm(opt.params(), clip);
    opt.step();
  }
  return r;
}

}  // namespace mamt::bilevel
