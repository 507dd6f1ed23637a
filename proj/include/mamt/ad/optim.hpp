#pragma once

#include "mamt/ad/tensor.hpp"

#include <cmath>
#include <vector>

namespace mamt::ad {

template <class S>
using ParamList = std::vector<Var<S>>;

template <class S>
void zero_grad(ParamList<S>& params) {
  for (auto& p : params) p.zero_grad();
}

template <class S>
S grad_norm(const ParamList<S>& params) {
  S total = 0;
  for (const auto& p : params)
    if (p.grad().size() != 0) total += p.grad().squaredNorm();
  return std::sqrt(total);
}

/// Rescales gradients in place so their joint L2 norm is at most max_norm.
/// Returns the norm measured before clipping.
template <class S>
S clip_grad_norm(ParamList<S>& params, S max_norm) {
  const S norm = grad_norm(params);
  if (norm > max_norm && norm > S(0)) {
    const S factor = max_norm / (norm + S(1e-6));
    for (auto& p : params)
      if (p.grad().size() != 0) p.grad_buffer() *= factor;
  }
  return norm;
}

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  double decay = 0.0;  // lr_t = lr / (1 + decay * t)
};

template <class S>
class Adam {
 public:
  Adam() = default;
  Adam(ParamList<S> params, AdamOptions opt) : params_(std::move(params)), opt_(opt) {
    for (const auto& p : params_) {
      m_.push_back(Matrix<S>::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix<S>::Zero(p.rows(), p.cols()));
    }
  }

  ParamList<S>& params() { return params_; }
  long steps() const { return t_; }

  void zero_grad() { ad::zero_grad(params_); }

  void step() {
    ++t_;
    const double lr = opt_.lr / (1.0 + opt_.decay * static_cast<double>(t_ - 1));
    const S bc1 = S(1) - static_cast<S>(std::pow(opt_.beta1, static_cast<double>(t_)));
    const S bc2 = S(1) - static_cast<S>(std::pow(opt_.beta2, static_cast<double>(t_)));
    const S b1 = static_cast<S>(opt_.beta1);
    const S b2 = static_cast<S>(opt_.beta2);
    const S eps = static_cast<S>(opt_.eps);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = params_[k];
      if (p.grad().size() == 0) continue;
      const auto& g = p.grad();
      m_[k] = b1 * m_[k] + (S(1) - b1) * g;
      v_[k] = b2 * v_[k] + (S(1) - b2) * g.cwiseProduct(g);
      auto& w = p.mutable_value();
      w.array() -= static_cast<S>(lr) * (m_[k].array() / bc1) /
                   ((v_[k].array() / bc2).sqrt() + eps);
    }
  }

 private:
  ParamList<S> params_;
  AdamOptions opt_;
  std::vector<Matrix<S>> m_, v_;
  long t_ = 0;
};

}  // namespace mamt::ad
