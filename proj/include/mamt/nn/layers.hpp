#pragma once

#include "mamt/ad/optim.hpp"
#include "mamt/ad/tensor.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace mamt::nn {

using Rng = std::mt19937_64;

enum class Init { Default, Zero };

/// Fully connected layer computing X W + b, with W stored as (in x out).
template <class S>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, Rng& rng, bool bias = true, Init init = Init::Default)
      : in_(in), out_(out), has_bias_(bias) {
    // U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual default for dense layers.
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    ad::Matrix<S> w(in, out);
    ad::Matrix<S> b(1, out);
    if (init == Init::Zero) {
      w.setZero();
      b.setZero();
    } else {
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = static_cast<S>(u(rng));
      for (Eigen::Index c = 0; c < b.cols(); ++c) b(0, c) = static_cast<S>(u(rng));
    }
    weight_ = ad::parameter<S>(std::move(w));
    if (has_bias_) bias_ = ad::parameter<S>(std::move(b));
  }

  ad::Var<S> operator()(const ad::Var<S>& x) const {
    if (x.cols() != in_)
      throw std::invalid_argument("Linear: expected " + std::to_string(in_) + " input features, got " +
                                  std::to_string(x.cols()));
    auto y = ad::matmul(x, weight_);
    return has_bias_ ? ad::add_row(y, bias_) : y;
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  const ad::Var<S>& weight() const { return weight_; }

  /// Same structure and values, independent parameter nodes.
  Linear deep_copy() const {
    Linear c = *this;
    c.weight_ = ad::parameter<S>(weight_.value());
    if (has_bias_) c.bias_ = ad::parameter<S>(bias_.value());
    return c;
  }

  void collect(ad::ParamList<S>& out) const {
    out.push_back(weight_);
    if (has_bias_) out.push_back(bias_);
  }

 private:
  int in_ = 0;
  int out_ = 0;
  bool has_bias_ = true;
  ad::Var<S> weight_;
  ad::Var<S> bias_;
};

/// Stack of Linear layers with leaky-ReLU between them; the last layer is linear.
template <class S>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::vector<int>& sizes, Rng& rng, Init last_init = Init::Default) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      const bool last = k + 2 == sizes.size();
      layers_.emplace_back(sizes[k], sizes[k + 1], rng, true, last ? last_init : Init::Default);
    }
  }

  ad::Var<S> operator()(ad::Var<S> x) const {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      x = layers_[k](x);
      if (k + 1 < layers_.size()) x = ad::leaky_relu(x);
    }
    return x;
  }

  int in_features() const { return layers_.front().in_features(); }
  int out_features() const { return layers_.back().out_features(); }

  Mlp deep_copy() const {
    Mlp c;
    for (const auto& l : layers_) c.layers_.push_back(l.deep_copy());
    return c;
  }

  void collect(ad::ParamList<S>& out) const {
    for (const auto& l : layers_) l.collect(out);
  }

 private:
  std::vector<Linear<S>> layers_;
};

/// Overwrites dst values with src values, parameter for parameter.
template <class S>
void copy_values(ad::ParamList<S>& dst, const ad::ParamList<S>& src) {
  if (dst.size() != src.size()) throw std::invalid_argument("copy_values: parameter count mismatch");
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k].mutable_value() = src[k].value();
}

template <class S>
std::size_t parameter_count(const ad::ParamList<S>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.value().size());
  return n;
}

}  // namespace mamt::nn
