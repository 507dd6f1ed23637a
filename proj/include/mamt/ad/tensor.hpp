#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// Every value is a 2-D matrix; batches are laid out row-wise (B x features).
// A Var owns a shared node; operations record their parents and a backward
// closure only when at least one input requires a gradient, so evaluating a
// network on constants costs nothing beyond the forward arithmetic.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mamt::ad {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {
inline thread_local int no_grad_depth = 0;
}  // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

template <class S>
struct Node {
  Matrix<S> value;
  Matrix<S> grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;

  Matrix<S>& grad_buffer() {
    if (grad.size() == 0) grad = Matrix<S>::Zero(value.rows(), value.cols());
    return grad;
  }
};

template <class S>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<S>> n) : node_(std::move(n)) {}

  const Matrix<S>& value() const { return node_->value; }
  Matrix<S>& mutable_value() { return node_->value; }
  const Matrix<S>& grad() const { return node_->grad; }
  Matrix<S>& grad_buffer() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.resize(0, 0); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }
  S item() const {
    if (rows() != 1 || cols() != 1) throw std::logic_error("item() on non-scalar");
    return node_->value(0, 0);
  }

  const std::shared_ptr<Node<S>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<S>> node_;
};

template <class S>
Var<S> constant(Matrix<S> value) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  return Var<S>(std::move(n));
}

template <class S>
Var<S> scalar_constant(S v) {
  Matrix<S> m(1, 1);
  m(0, 0) = v;
  return constant<S>(std::move(m));
}

/// A trainable leaf.
template <class S>
Var<S> parameter(Matrix<S> value) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var<S>(std::move(n));
}

namespace detail {

template <class S>
bool any_requires(std::initializer_list<const Var<S>*> vs) {
  if (!grad_enabled()) return false;
  for (const auto* v : vs)
    if (v->requires_grad()) return true;
  return false;
}

template <class S, class Fn>
Var<S> make_result(Matrix<S> value, std::vector<std::shared_ptr<Node<S>>> parents, bool needs_grad,
                   Fn&& backward) {
  auto n = std::make_shared<Node<S>>();
  n->value = std::move(value);
  if (needs_grad) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward = std::forward<Fn>(backward);
  }
  return Var<S>(std::move(n));
}

inline void check_same_shape(Eigen::Index ar, Eigen::Index ac, Eigen::Index br, Eigen::Index bc,
                             const char* op) {
  if (ar != br || ac != bc)
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(ar) + "x" +
                                std::to_string(ac) + " vs " + std::to_string(br) + "x" +
                                std::to_string(bc) + ")");
}

}  // namespace detail

template <class S>
Var<S> stop_gradient(const Var<S>& a) {
  return constant<S>(a.value());
}

template <class S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  const bool req = detail::any_requires<S>({&a, &b});
  Matrix<S> out = a.value() * b.value();
  return detail::make_result<S>(std::move(out), {a.node(), b.node()}, req, [](Node<S>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) pa->grad_buffer().noalias() += self.grad * pb->value.transpose();
    if (pb->requires_grad) pb->grad_buffer().noalias() += pa->value.transpose() * self.grad;
  });
}

template <class S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "add");
  const bool req = detail::any_requires<S>({&a, &b});
  return detail::make_result<S>(a.value() + b.value(), {a.node(), b.node()}, req,
                                [](Node<S>& self) {
                                  for (auto& p : self.parents)
                                    if (p->requires_grad) p->grad_buffer() += self.grad;
                                });
}

template <class S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "sub");
  const bool req = detail::any_requires<S>({&a, &b});
  return detail::make_result<S>(a.value() - b.value(), {a.node(), b.node()}, req,
                                [](Node<S>& self) {
                                  auto& pa = self.parents[0];
                                  auto& pb = self.parents[1];
                                  if (pa->requires_grad) pa->grad_buffer() += self.grad;
                                  if (pb->requires_grad) pb->grad_buffer() -= self.grad;
                                });
}

/// a (B x C) + row vector b (1 x C), broadcast over rows.
template <class S>
Var<S> add_row(const Var<S>& a, const Var<S>& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) throw std::invalid_argument("add_row: bad bias shape");
  const bool req = detail::any_requires<S>({&a, &b});
  Matrix<S> out = a.value();
  out.rowwise() += b.value().row(0);
  return detail::make_result<S>(std::move(out), {a.node(), b.node()}, req, [](Node<S>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) pa->grad_buffer() += self.grad;
    if (pb->requires_grad) pb->grad_buffer() += self.grad.colwise().sum();
  });
}

/// Element-wise product.
template <class S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "mul");
  const bool req = detail::any_requires<S>({&a, &b});
  Matrix<S> out = a.value().cwiseProduct(b.value());
  return detail::make_result<S>(std::move(out), {a.node(), b.node()}, req, [](Node<S>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) pa->grad_buffer() += self.grad.cwiseProduct(pb->value);
    if (pb->requires_grad) pb->grad_buffer() += self.grad.cwiseProduct(pa->value);
  });
}

/// a (B x C) scaled row-wise by column vector w (B x 1).
template <class S>
Var<S> mul_col(const Var<S>& a, const Var<S>& w) {
  if (w.cols() != 1 || w.rows() != a.rows()) throw std::invalid_argument("mul_col: bad weight shape");
  const bool req = detail::any_requires<S>({&a, &w});
  Matrix<S> out = (a.value().array().colwise() * w.value().col(0).array()).matrix();
  return detail::make_result<S>(std::move(out), {a.node(), w.node()}, req, [](Node<S>& self) {
    auto& pa = self.parents[0];
    auto& pw = self.parents[1];
    if (pa->requires_grad)
      pa->grad_buffer() += (self.grad.array().colwise() * pw->value.col(0).array()).matrix();
    if (pw->requires_grad)
      pw->grad_buffer() += self.grad.cwiseProduct(pa->value).rowwise().sum();
  });
}

/// Row-wise dot product: (B x C, B x C) -> B x 1.
template <class S>
Var<S> rowdot(const Var<S>& a, const Var<S>& b) {
  detail::check_same_shape(a.rows(), a.cols(), b.rows(), b.cols(), "rowdot");
  const bool req = detail::any_requires<S>({&a, &b});
  Matrix<S> out = a.value().cwiseProduct(b.value()).rowwise().sum();
  return detail::make_result<S>(std::move(out), {a.node(), b.node()}, req, [](Node<S>& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    const auto g = self.grad.col(0).array();
    if (pa->requires_grad) pa->grad_buffer() += (pb->value.array().colwise() * g).matrix();
    if (pb->requires_grad) pb->grad_buffer() += (pa->value.array().colwise() * g).matrix();
  });
}

template <class S>
Var<S> scale(const Var<S>& a, S s) {
  const bool req = detail::any_requires<S>({&a});
  return detail::make_result<S>(a.value() * s, {a.node()}, req, [s](Node<S>& self) {
    self.parents[0]->grad_buffer() += self.grad * s;
  });
}

template <class S>
Var<S> add_scalar(const Var<S>& a, S s) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().array() + s;
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    self.parents[0]->grad_buffer() += self.grad;
  });
}

template <class S>
Var<S> leaky_relu(const Var<S>& a, S slope = S(0.01)) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().unaryExpr([slope](S x) { return x > S(0) ? x : slope * x; });
  return detail::make_result<S>(std::move(out), {a.node()}, req, [slope](Node<S>& self) {
    auto& p = self.parents[0];
    p->grad_buffer() += self.grad.binaryExpr(
        p->value, [slope](S g, S x) { return x > S(0) ? g : slope * g; });
  });
}

template <class S>
Var<S> relu(const Var<S>& a) {
  return leaky_relu<S>(a, S(0));
}

template <class S>
Var<S> tanh(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().array().tanh().matrix();
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    self.parents[0]->grad_buffer() +=
        self.grad.cwiseProduct((S(1) - self.value.array().square()).matrix());
  });
}

/// log(1 + exp(x)), evaluated stably.
template <class S>
Var<S> softplus(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().unaryExpr([](S x) {
    return x > S(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  });
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    auto& p = self.parents[0];
    p->grad_buffer() += self.grad.binaryExpr(p->value, [](S g, S x) {
      return g / (S(1) + std::exp(-x));
    });
  });
}

template <class S>
Var<S> exp(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().array().exp().matrix();
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    self.parents[0]->grad_buffer() += self.grad.cwiseProduct(self.value);
  });
}

template <class S>
Var<S> log(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().array().log().matrix();
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    auto& p = self.parents[0];
    p->grad_buffer() += self.grad.cwiseQuotient(p->value);
  });
}

template <class S>
Var<S> square(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().array().square().matrix();
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    auto& p = self.parents[0];
    p->grad_buffer() += S(2) * self.grad.cwiseProduct(p->value);
  });
}

namespace detail {
template <class S>
Matrix<S> row_softmax(const Matrix<S>& x) {
  Matrix<S> out = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const S mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}
}  // namespace detail

template <class S>
Var<S> softmax_rows(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = detail::row_softmax<S>(a.value());
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    const auto& y = self.value;
    Matrix<S> gy = self.grad.cwiseProduct(y);
    Matrix<S> dx = gy - (y.array().colwise() * gy.rowwise().sum().col(0).array()).matrix();
    self.parents[0]->grad_buffer() += dx;
  });
}

template <class S>
Var<S> log_softmax_rows(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const S mx = out.row(r).maxCoeff();
    const S lse = mx + std::log((out.row(r).array() - mx).exp().sum());
    out.row(r).array() -= lse;
  }
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    Matrix<S> sm = self.value.array().exp().matrix();
    Matrix<S> dx = self.grad - (sm.array().colwise() * self.grad.rowwise().sum().col(0).array()).matrix();
    self.parents[0]->grad_buffer() += dx;
  });
}

template <class S>
Var<S> sum(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    self.parents[0]->grad_buffer().array() += self.grad(0, 0);
  });
}

template <class S>
Var<S> mean(const Var<S>& a) {
  const S n = static_cast<S>(a.value().size());
  return scale<S>(sum<S>(a), S(1) / n);
}

/// Sum across columns: B x C -> B x 1.
template <class S>
Var<S> row_sum(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().rowwise().sum();
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    auto& p = self.parents[0];
    p->grad_buffer().colwise() += self.grad.col(0);
  });
}

/// Mean across rows: B x C -> 1 x C.
template <class S>
Var<S> col_mean(const Var<S>& a) {
  const bool req = detail::any_requires<S>({&a});
  const S n = static_cast<S>(a.rows());
  Matrix<S> out = a.value().colwise().sum() / n;
  return detail::make_result<S>(std::move(out), {a.node()}, req, [n](Node<S>& self) {
    auto& p = self.parents[0];
    p->grad_buffer().rowwise() += self.grad.row(0) / n;
  });
}

/// Replicates a 1 x C row into B x C.
template <class S>
Var<S> broadcast_rows(const Var<S>& a, Eigen::Index rows) {
  if (a.rows() != 1) throw std::invalid_argument("broadcast_rows: expected a single row");
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().replicate(rows, 1);
  return detail::make_result<S>(std::move(out), {a.node()}, req, [](Node<S>& self) {
    self.parents[0]->grad_buffer() += self.grad.colwise().sum();
  });
}

template <class S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  bool req = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
    req = req || (grad_enabled() && p.requires_grad());
    parents.push_back(p.node());
  }
  Matrix<S> out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return detail::make_result<S>(std::move(out), std::move(parents), req, [](Node<S>& self) {
    Eigen::Index o = 0;
    for (auto& p : self.parents) {
      const auto c = p->value.cols();
      if (p->requires_grad) p->grad_buffer() += self.grad.middleCols(o, c);
      o += c;
    }
  });
}

template <class S>
Var<S> slice_cols(const Var<S>& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols()) throw std::invalid_argument("slice_cols: out of range");
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out = a.value().middleCols(start, count);
  return detail::make_result<S>(std::move(out), {a.node()}, req, [start, count](Node<S>& self) {
    self.parents[0]->grad_buffer().middleCols(start, count) += self.grad;
  });
}

/// Picks one column per row: out(r) = a(r, idx[r]).
template <class S>
Var<S> gather_cols(const Var<S>& a, std::span<const int> idx) {
  if (static_cast<Eigen::Index>(idx.size()) != a.rows())
    throw std::invalid_argument("gather_cols: index count mismatch");
  const bool req = detail::any_requires<S>({&a});
  Matrix<S> out(a.rows(), 1);
  std::vector<int> keep(idx.begin(), idx.end());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    if (keep[r] < 0 || keep[r] >= a.cols()) throw std::out_of_range("gather_cols: index out of range");
    out(r, 0) = a.value()(r, keep[r]);
  }
  return detail::make_result<S>(std::move(out), {a.node()}, req,
                                [keep = std::move(keep)](Node<S>& self) {
                                  auto& g = self.parents[0]->grad_buffer();
                                  for (Eigen::Index r = 0; r < g.rows(); ++r)
                                    g(r, keep[r]) += self.grad(r, 0);
                                });
}

// Operator sugar for the common cases.
template <class S>
Var<S> operator+(const Var<S>& a, const Var<S>& b) { return add(a, b); }
template <class S>
Var<S> operator-(const Var<S>& a, const Var<S>& b) { return sub(a, b); }
template <class S>
Var<S> operator*(const Var<S>& a, S s) { return scale(a, s); }

/// Accumulates d(root)/d(leaf) into every reachable node that requires a gradient.
template <class S>
void backward(const Var<S>& root) {
  if (root.rows() != 1 || root.cols() != 1) throw std::logic_error("backward: root must be a scalar");
  if (!root.requires_grad()) return;

  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<std::pair<Node<S>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<S>* p = n->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer().array() += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
  // Release interior gradients so a graph can be reused for a second pass.
  for (Node<S>* n : order)
    if (n->backward) n->grad.resize(0, 0);
}

}  // namespace mamt::ad
