#pragma once

// Finite discrete distributions and the exact KL divergence between them.
// All logarithms are natural (nats).

#include "mamt/error.hpp"

#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mamt::divergence {

inline constexpr double kNormTolerance = 1e-10;

class DiscreteDistribution {
 public:
  DiscreteDistribution() = default;
  DiscreteDistribution(std::initializer_list<double> p) : p_(p) { validate(); }
  explicit DiscreteDistribution(std::vector<double> p) : p_(std::move(p)) { validate(); }

  static DiscreteDistribution uniform(int k) {
    if (k < 1) throw std::invalid_argument("DiscreteDistribution::uniform: empty support");
    return DiscreteDistribution(std::vector<double>(static_cast<std::size_t>(k), 1.0 / k));
  }

  /// Two-outcome distribution (x, 1 - x).
  static DiscreteDistribution bernoulli(double x) { return DiscreteDistribution({x, 1.0 - x}); }

  int size() const { return static_cast<int>(p_.size()); }
  double operator[](int k) const { return p_[static_cast<std::size_t>(k)]; }
  std::span<const double> probs() const { return p_; }

 private:
  void validate() const {
    if (p_.empty()) throw std::invalid_argument("DiscreteDistribution: empty support");
    double s = 0.0;
    for (double v : p_) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw std::invalid_argument("DiscreteDistribution: negative or non-finite probability");
      s += v;
    }
    if (std::abs(s - 1.0) > kNormTolerance)
      throw std::invalid_argument("DiscreteDistribution: probabilities sum to " + std::to_string(s));
  }

  std::vector<double> p_;
};

/// sum_x p(x) log(p(x) / q(x)) over raw probability arrays.
inline double kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw DivergenceUndefined("kl: support sizes differ (" + std::to_string(p.size()) + " vs " +
                              std::to_string(q.size()) + ")");
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == 0.0) continue;
    if (q[k] <= 0.0) throw DivergenceUndefined("kl: q(" + std::to_string(k) + ") = 0 where p > 0");
    s += p[k] * std::log(p[k] / q[k]);
  }
  return s;
}

inline double kl(const DiscreteDistribution& p, const DiscreteDistribution& q) { return kl(p.probs(), q.probs()); }

}  // namespace mamt::divergence
