#pragma once

// Central-difference check of reverse-mode gradients over parameter lists.

#include "mamt/ad/optim.hpp"

#include <gtest/gtest.h>

#include <functional>

namespace testsupport {

struct GradCheckResult {
  double worst_rel = 0.0;
  int checked = 0;
};

/// `loss` rebuilds the graph from the current parameter values. Entries
/// where both derivatives are below `abs_floor` are skipped as uninformative.
template <class S>
GradCheckResult grad_check(mamt::ad::ParamList<S> params, const std::function<mamt::ad::Var<S>()>& loss, double h = 1e-5,
                           int stride = 1, double abs_floor = 1e-7) {
  mamt::ad::zero_grad(params);
  mamt::ad::backward(loss());
  std::vector<mamt::ad::Matrix<S>> analytic;
  for (const auto& p : params)
    analytic.push_back(p.grad().size() ? p.grad() : mamt::ad::Matrix<S>::Zero(p.rows(), p.cols()));
  mamt::ad::zero_grad(params);

  GradCheckResult r;
  int counter = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& v = params[k].mutable_value();
    for (Eigen::Index e = 0; e < v.size(); ++e) {
      if (counter++ % stride != 0) continue;
      const S x0 = v.data()[e];
      v.data()[e] = x0 + S(h);
      const double fp = static_cast<double>(loss().item());
      v.data()[e] = x0 - S(h);
      const double fm = static_cast<double>(loss().item());
      v.data()[e] = x0;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = static_cast<double>(analytic[k].data()[e]);
      if (std::abs(num) < abs_floor && std::abs(ana) < abs_floor) continue;
      r.worst_rel = std::max(r.worst_rel, std::abs(num - ana) / std::max(std::abs(num), std::abs(ana)));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace testsupport
