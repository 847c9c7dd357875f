#pragma once

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// Ops evaluate eagerly. When a Tape is active (TapeScope) and any input
// requires a gradient, the op records a closure that pushes the output's
// gradient back into its inputs. Tape::backward replays closures in reverse
// creation order, which is a valid topological order.

#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "clonecraft/core/error.hpp"
#include "clonecraft/core/matrix.hpp"
#include "clonecraft/simd/kernels.hpp"

namespace clonecraft::nn {

template <class T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::function<void(const Matrix<T>&)> backward;

  Matrix<T>& grad_buffer() {
    if (!grad.same_shape(value)) grad.resize(value.rows(), value.cols());
    return grad;
  }
  bool has_grad() const { return grad.same_shape(value) && !value.empty(); }
  void zero_grad() {
    if (has_grad()) grad.fill(T{0});
  }
};

template <class T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Var constant(Matrix<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return Var(std::move(n));
  }
  static Var parameter(Matrix<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
  }
  static Var scalar(T v) { return constant(Matrix<T>(1, 1, v)); }

  const Matrix<T>& value() const { return node_->value; }
  Matrix<T>& mutable_value() { return node_->value; }
  const Matrix<T>& grad() const { return node_->grad; }
  Matrix<T>& grad_buffer() const { return node_->grad_buffer(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  T item() const { return node_->value[0]; }
  bool valid() const { return static_cast<bool>(node_); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <class T>
class Tape {
 public:
  void record(std::shared_ptr<Node<T>> n) { nodes_.push_back(std::move(n)); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var<T>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1) {
      throw Error(Errc::ShapeError, "backward requires a 1x1 loss");
    }
    loss.grad_buffer().fill(T{1});
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<T>& n = **it;
      if (n.backward && n.has_grad()) n.backward(n.grad);
    }
  }

  void clear() { nodes_.clear(); }
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::shared_ptr<Node<T>>> nodes_;
};

namespace detail {
template <class T>
inline Tape<T>*& active_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}
}  // namespace detail

// Activates a tape for the current thread for the scope's lifetime.
template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : prev_(detail::active_tape<T>()) { detail::active_tape<T>() = &tape; }
  ~TapeScope() { detail::active_tape<T>() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

template <class T>
inline bool recording() {
  return detail::active_tape<T>() != nullptr;
}

namespace detail {

template <class T, class Backward>
Var<T> make_op(Matrix<T> value, std::initializer_list<const Var<T>*> inputs, Backward&& bw) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  bool needs = false;
  for (const Var<T>* v : inputs) needs = needs || v->requires_grad();
  if (needs && recording<T>()) {
    n->requires_grad = true;
    n->backward = std::forward<Backward>(bw);
    active_tape<T>()->record(n);
  }
  return Var<T>(std::move(n));
}

template <class T, class Backward>
Var<T> make_op_list(Matrix<T> value, const std::vector<Var<T>>& inputs, Backward&& bw) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  bool needs = false;
  for (const Var<T>& v : inputs) needs = needs || v.requires_grad();
  if (needs && recording<T>()) {
    n->requires_grad = true;
    n->backward = std::forward<Backward>(bw);
    active_tape<T>()->record(n);
  }
  return Var<T>(std::move(n));
}

inline void require(bool cond, const char* what) {
  if (!cond) throw Error(Errc::ShapeError, what);
}

template <class T, class F>
Var<T> unary(const Var<T>& a, F&& fwd_deriv) {
  // fwd_deriv(x, &y, &dy_dx)
  const Matrix<T>& x = a.value();
  Matrix<T> y(x.rows(), x.cols());
  Matrix<T> d(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) fwd_deriv(x[i], y[i], d[i]);
  return make_op<T>(std::move(y), {&a}, [a, d = std::move(d)](const Matrix<T>& g) mutable {
    if (!a.requires_grad()) return;
    Matrix<T>& ga = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * d[i];
  });
}

}  // namespace detail

// ---- products --------------------------------------------------------------

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix<T> c(m, n);
  simd::kernels<T>().gemm_nn(m, n, k, a.value().data(), b.value().data(), c.data());
  return detail::make_op<T>(std::move(c), {&a, &b}, [a, b, m, k, n](const Matrix<T>& g) mutable {
    const auto& K = simd::kernels<T>();
    if (a.requires_grad()) K.gemm_nt(m, k, n, g.data(), b.value().data(), a.grad_buffer().data());
    if (b.requires_grad()) K.gemm_tn(k, n, m, a.value().data(), g.data(), b.grad_buffer().data());
  });
}

// a[m,k] * b[n,k]^T
template <class T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  detail::require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix<T> c(m, n);
  simd::kernels<T>().gemm_nt(m, n, k, a.value().data(), b.value().data(), c.data());
  return detail::make_op<T>(std::move(c), {&a, &b}, [a, b, m, k, n](const Matrix<T>& g) mutable {
    const auto& K = simd::kernels<T>();
    if (a.requires_grad()) K.gemm_nn(m, k, n, g.data(), b.value().data(), a.grad_buffer().data());
    if (b.requires_grad()) K.gemm_tn(n, k, m, g.data(), a.value().data(), b.grad_buffer().data());
  });
}

// x[m,k] * w[k,n] + bias[1,n]
template <class T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& bias) {
  detail::require(x.cols() == w.rows() && bias.rows() == 1 && bias.cols() == w.cols(),
                  "affine: shape mismatch");
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  Matrix<T> c(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = bias.value()[j];
  simd::kernels<T>().gemm_nn(m, n, k, x.value().data(), w.value().data(), c.data());
  return detail::make_op<T>(std::move(c), {&x, &w, &bias},
                            [x, w, bias, m, k, n](const Matrix<T>& g) mutable {
                              const auto& K = simd::kernels<T>();
                              if (x.requires_grad())
                                K.gemm_nt(m, k, n, g.data(), w.value().data(), x.grad_buffer().data());
                              if (w.requires_grad())
                                K.gemm_tn(k, n, m, x.value().data(), g.data(), w.grad_buffer().data());
                              if (bias.requires_grad()) {
                                Matrix<T>& gb = bias.grad_buffer();
                                for (std::size_t i = 0; i < m; ++i)
                                  for (std::size_t j = 0; j < n; ++j) gb[j] += g(i, j);
                              }
                            });
}

// ---- elementwise -----------------------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require(a.value().same_shape(b.value()), "add: shape mismatch");
  Matrix<T> c = a.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += b.value()[i];
  return detail::make_op<T>(std::move(c), {&a, &b}, [a, b](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data());
    if (b.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), b.grad_buffer().data());
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::require(a.value().same_shape(b.value()), "sub: shape mismatch");
  Matrix<T> c = a.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b.value()[i];
  return detail::make_op<T>(std::move(c), {&a, &b}, [a, b](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data());
    if (b.requires_grad()) simd::kernels<T>().axpy(g.size(), T{-1}, g.data(), b.grad_buffer().data());
  });
}

// a[m,n] + row[1,n] broadcast over rows
template <class T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  detail::require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  Matrix<T> c = a.value();
  const std::size_t m = c.rows(), n = c.cols();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) += row.value()[j];
  return detail::make_op<T>(std::move(c), {&a, &row}, [a, row, m, n](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data());
    if (row.requires_grad()) {
      Matrix<T>& gr = row.grad_buffer();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g(i, j);
    }
  });
}

template <class T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b) {
  detail::require(a.value().same_shape(b.value()), "hadamard: shape mismatch");
  Matrix<T> c = a.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b.value()[i];
  return detail::make_op<T>(std::move(c), {&a, &b}, [a, b](const Matrix<T>& g) mutable {
    if (a.requires_grad()) {
      Matrix<T>& ga = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    }
    if (b.requires_grad()) {
      Matrix<T>& gb = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  Matrix<T> c = a.value();
  for (auto& v : c.storage()) v *= s;
  return detail::make_op<T>(std::move(c), {&a}, [a, s](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), s, g.data(), a.grad_buffer().data());
  });
}

template <class T>
Var<T> add_constant(const Var<T>& a, T s) {
  Matrix<T> c = a.value();
  for (auto& v : c.storage()) v += s;
  return detail::make_op<T>(std::move(c), {&a}, [a](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data());
  });
}

// a * s where s is a 1x1 variable
template <class T>
Var<T> mul_scalar(const Var<T>& a, const Var<T>& s) {
  detail::require(s.rows() == 1 && s.cols() == 1, "mul_scalar: s must be 1x1");
  const T sv = s.item();
  Matrix<T> c = a.value();
  for (auto& v : c.storage()) v *= sv;
  return detail::make_op<T>(std::move(c), {&a, &s}, [a, s, sv](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), sv, g.data(), a.grad_buffer().data());
    if (s.requires_grad()) s.grad_buffer()[0] += simd::kernels<T>().dot(g.size(), g.data(), a.value().data());
  });
}

// a + s where s is a 1x1 variable
template <class T>
Var<T> add_scalar(const Var<T>& a, const Var<T>& s) {
  detail::require(s.rows() == 1 && s.cols() == 1, "add_scalar: s must be 1x1");
  const T sv = s.item();
  Matrix<T> c = a.value();
  for (auto& v : c.storage()) v += sv;
  return detail::make_op<T>(std::move(c), {&a, &s}, [a, s](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data());
    if (s.requires_grad()) {
      T acc{0};
      for (T v : g.storage()) acc += v;
      s.grad_buffer()[0] += acc;
    }
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  return detail::unary<T>(a, [](T x, T& y, T& d) {
    y = T{1} / (T{1} + std::exp(-x));
    d = y * (T{1} - y);
  });
}

template <class T>
Var<T> tanh(const Var<T>& a) {
  return detail::unary<T>(a, [](T x, T& y, T& d) {
    y = std::tanh(x);
    d = T{1} - y * y;
  });
}

template <class T>
Var<T> relu(const Var<T>& a) {
  return detail::unary<T>(a, [](T x, T& y, T& d) {
    y = x > T{0} ? x : T{0};
    d = x > T{0} ? T{1} : T{0};
  });
}

template <class T>
Var<T> abs(const Var<T>& a) {
  return detail::unary<T>(a, [](T x, T& y, T& d) {
    y = std::abs(x);
    d = x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0});
  });
}

// ---- reductions ------------------------------------------------------------

template <class T>
Var<T> sum_all(const Var<T>& a) {
  T acc{0};
  for (T v : a.value().storage()) acc += v;
  return detail::make_op<T>(Matrix<T>(1, 1, acc), {&a}, [a](const Matrix<T>& g) mutable {
    if (!a.requires_grad()) return;
    Matrix<T>& ga = a.grad_buffer();
    for (auto& v : ga.storage()) v += g[0];
  });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
  return scale(sum_all(a), T{1} / static_cast<T>(a.value().size()));
}

// Row-wise dot product: [m,n] x [m,n] -> [m,1]
template <class T>
Var<T> row_dot(const Var<T>& a, const Var<T>& b) {
  detail::require(a.value().same_shape(b.value()), "row_dot: shape mismatch");
  const std::size_t m = a.rows(), n = a.cols();
  Matrix<T> c(m, 1);
  for (std::size_t i = 0; i < m; ++i)
    c[i] = simd::kernels<T>().dot(n, a.value().data() + i * n, b.value().data() + i * n);
  return detail::make_op<T>(std::move(c), {&a, &b}, [a, b, m, n](const Matrix<T>& g) mutable {
    const auto& K = simd::kernels<T>();
    if (a.requires_grad())
      for (std::size_t i = 0; i < m; ++i)
        K.axpy(n, g[i], b.value().data() + i * n, a.grad_buffer().data() + i * n);
    if (b.requires_grad())
      for (std::size_t i = 0; i < m; ++i)
        K.axpy(n, g[i], a.value().data() + i * n, b.grad_buffer().data() + i * n);
  });
}

// a[m,n] scaled per row by v[m,1]
template <class T>
Var<T> mul_col(const Var<T>& a, const Var<T>& v) {
  detail::require(v.cols() == 1 && v.rows() == a.rows(), "mul_col: shape mismatch");
  const std::size_t m = a.rows(), n = a.cols();
  Matrix<T> c = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) *= v.value()[i];
  return detail::make_op<T>(std::move(c), {&a, &v}, [a, v, m, n](const Matrix<T>& g) mutable {
    const auto& K = simd::kernels<T>();
    if (a.requires_grad())
      for (std::size_t i = 0; i < m; ++i) K.axpy(n, v.value()[i], g.data() + i * n, a.grad_buffer().data() + i * n);
    if (v.requires_grad()) {
      Matrix<T>& gv = v.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) gv[i] += K.dot(n, g.data() + i * n, a.value().data() + i * n);
    }
  });
}

// Divides each row by its L2 norm. A row with (near) zero norm is a
// degenerate input and raises NumericalError.
template <class T>
Var<T> row_normalize(const Var<T>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Matrix<T> y = a.value();
  std::vector<T> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T nrm = std::sqrt(simd::kernels<T>().dot(n, y.data() + i * n, y.data() + i * n));
    if (!(nrm > T(1e-12)) || !std::isfinite(nrm)) {
      throw Error(Errc::NumericalError, "row_normalize: zero or non-finite row norm");
    }
    norms[i] = nrm;
    for (std::size_t j = 0; j < n; ++j) y(i, j) /= nrm;
  }
  Matrix<T> yc = y;
  return detail::make_op<T>(std::move(y), {&a}, [a, yc = std::move(yc), norms = std::move(norms), m, n](
                                                     const Matrix<T>& g) mutable {
    if (!a.requires_grad()) return;
    const auto& K = simd::kernels<T>();
    Matrix<T>& ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const T* yi = yc.data() + i * n;
      const T* gi = g.data() + i * n;
      const T proj = K.dot(n, yi, gi);
      for (std::size_t j = 0; j < n; ++j) ga(i, j) += (gi[j] - yi[j] * proj) / norms[i];
    }
  });
}

// log(sum(exp(row))) per row -> [m,1]
template <class T>
Var<T> row_logsumexp(const Var<T>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Matrix<T> out(m, 1);
  Matrix<T> soft(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a.value()(i, j));
    T s{0};
    for (std::size_t j = 0; j < n; ++j) {
      soft(i, j) = std::exp(a.value()(i, j) - mx);
      s += soft(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) soft(i, j) /= s;
    out[i] = mx + std::log(s);
  }
  return detail::make_op<T>(std::move(out), {&a}, [a, soft = std::move(soft), m, n](const Matrix<T>& g) mutable {
    if (!a.requires_grad()) return;
    Matrix<T>& ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga(i, j) += g[i] * soft(i, j);
  });
}

template <class T>
Var<T> softmax_rows(const Var<T>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  Matrix<T> y(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, a.value()(i, j));
    T s{0};
    for (std::size_t j = 0; j < n; ++j) {
      y(i, j) = std::exp(a.value()(i, j) - mx);
      s += y(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) y(i, j) /= s;
  }
  Matrix<T> yc = y;
  return detail::make_op<T>(std::move(y), {&a}, [a, yc = std::move(yc), m, n](const Matrix<T>& g) mutable {
    if (!a.requires_grad()) return;
    Matrix<T>& ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      T s{0};
      for (std::size_t j = 0; j < n; ++j) s += yc(i, j) * g(i, j);
      for (std::size_t j = 0; j < n; ++j) ga(i, j) += yc(i, j) * (g(i, j) - s);
    }
  });
}

// Mean binary cross-entropy with logits over entries whose weight is
// non-zero: sum(w * bce) / sum(w). Returns 1x1.
template <class T>
Var<T> bce_with_logits(const Var<T>& logits, const Matrix<T>& targets, const Matrix<T>& weights) {
  detail::require(logits.value().same_shape(targets) && logits.value().same_shape(weights),
                  "bce_with_logits: shape mismatch");
  const Matrix<T>& x = logits.value();
  T wsum{0}, acc{0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T xi = x[i];
    const T l = std::max(xi, T{0}) - xi * targets[i] + std::log1p(std::exp(-std::abs(xi)));
    acc += weights[i] * l;
    wsum += weights[i];
  }
  if (wsum <= T{0}) wsum = T{1};
  return detail::make_op<T>(Matrix<T>(1, 1, acc / wsum), {&logits},
                            [logits, targets, weights, wsum](const Matrix<T>& g) mutable {
                              if (!logits.requires_grad()) return;
                              Matrix<T>& gl = logits.grad_buffer();
                              const Matrix<T>& xv = logits.value();
                              for (std::size_t i = 0; i < xv.size(); ++i) {
                                const T p = T{1} / (T{1} + std::exp(-xv[i]));
                                gl[i] += g[0] * weights[i] * (p - targets[i]) / wsum;
                              }
                            });
}

// ---- structural ------------------------------------------------------------

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == m, "concat_cols: row mismatch");
    n += p.cols();
  }
  Matrix<T> c(m, n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) c(i, off + j) = p.value()(i, j);
    off += p.cols();
  }
  return detail::make_op_list<T>(std::move(c), parts, [parts, m](const Matrix<T>& g) mutable {
    std::size_t o = 0;
    for (auto& p : parts) {
      if (p.requires_grad()) {
        Matrix<T>& gp = p.grad_buffer();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p.cols(); ++j) gp(i, j) += g(i, o + j);
      }
      o += p.cols();
    }
  });
}

template <class T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t n = parts[0].cols();
  std::size_t m = 0;
  for (const auto& p : parts) {
    detail::require(p.cols() == n, "concat_rows: column mismatch");
    m += p.rows();
  }
  Matrix<T> c(m, n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), c.data() + off * n);
    off += p.rows();
  }
  return detail::make_op_list<T>(std::move(c), parts, [parts, n](const Matrix<T>& g) mutable {
    std::size_t o = 0;
    for (auto& p : parts) {
      if (p.requires_grad())
        simd::kernels<T>().axpy(p.value().size(), T{1}, g.data() + o * n, p.grad_buffer().data());
      o += p.rows();
    }
  });
}

template <class T>
Var<T> slice_cols(const Var<T>& a, std::size_t c0, std::size_t c1) {
  detail::require(c0 <= c1 && c1 <= a.cols(), "slice_cols: out of range");
  const std::size_t m = a.rows(), w = c1 - c0;
  Matrix<T> c(m, w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) c(i, j) = a.value()(i, c0 + j);
  return detail::make_op<T>(std::move(c), {&a}, [a, c0, m, w](const Matrix<T>& g) mutable {
    if (!a.requires_grad()) return;
    Matrix<T>& ga = a.grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) ga(i, c0 + j) += g(i, j);
  });
}

template <class T>
Var<T> slice_rows(const Var<T>& a, std::size_t r0, std::size_t r1) {
  detail::require(r0 <= r1 && r1 <= a.rows(), "slice_rows: out of range");
  const std::size_t n = a.cols();
  Matrix<T> c(r1 - r0, n);
  std::copy(a.value().data() + r0 * n, a.value().data() + r1 * n, c.data());
  return detail::make_op<T>(std::move(c), {&a}, [a, r0, n](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data() + r0 * n);
  });
}

// out.row(i) = a.row(index[i]); gradients scatter-add back.
template <class T>
Var<T> gather_rows(const Var<T>& a, std::vector<std::size_t> index) {
  const std::size_t n = a.cols();
  Matrix<T> c(index.size(), n);
  for (std::size_t i = 0; i < index.size(); ++i) {
    detail::require(index[i] < a.rows(), "gather_rows: index out of range");
    std::copy(a.value().data() + index[i] * n, a.value().data() + (index[i] + 1) * n, c.data() + i * n);
  }
  return detail::make_op<T>(std::move(c), {&a}, [a, index = std::move(index), n](const Matrix<T>& g) mutable {
    if (!a.requires_grad()) return;
    Matrix<T>& ga = a.grad_buffer();
    for (std::size_t i = 0; i < index.size(); ++i)
      simd::kernels<T>().axpy(n, T{1}, g.data() + i * n, ga.data() + index[i] * n);
  });
}

template <class T>
Var<T> reshape(const Var<T>& a, std::size_t rows, std::size_t cols) {
  detail::require(rows * cols == a.value().size(), "reshape: size mismatch");
  Matrix<T> c(rows, cols, a.value().storage());
  return detail::make_op<T>(std::move(c), {&a}, [a](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data());
  });
}

// Sliding-window unfold over time for `batch` sequences of `steps` frames.
// Row r of x is frame (t, b) with r = t*batch + b when time_major, else
// r = b*steps + t. Output row r holds frames t-pad_left .. t-pad_left+kernel-1
// of the same sequence (zeros outside), kernel-major then channel.
template <class T>
Var<T> im2col(const Var<T>& x, std::size_t steps, std::size_t batch, std::size_t kernel,
              std::size_t pad_left, bool time_major) {
  detail::require(x.rows() == steps * batch, "im2col: rows != steps*batch");
  const std::size_t ch = x.cols();
  auto row_of = [=](std::size_t t, std::size_t b) { return time_major ? t * batch + b : b * steps + t; };
  Matrix<T> c(steps * batch, kernel * ch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) {
      T* dst = c.data() + row_of(t, b) * kernel * ch;
      for (std::size_t q = 0; q < kernel; ++q) {
        const long src_t = static_cast<long>(t + q) - static_cast<long>(pad_left);
        if (src_t < 0 || src_t >= static_cast<long>(steps)) continue;
        const T* src = x.value().data() + row_of(static_cast<std::size_t>(src_t), b) * ch;
        std::copy(src, src + ch, dst + q * ch);
      }
    }
  }
  return detail::make_op<T>(std::move(c), {&x}, [x, steps, batch, kernel, pad_left, ch, row_of](
                                                     const Matrix<T>& g) mutable {
    if (!x.requires_grad()) return;
    Matrix<T>& gx = x.grad_buffer();
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < steps; ++t) {
        const T* src = g.data() + row_of(t, b) * kernel * ch;
        for (std::size_t q = 0; q < kernel; ++q) {
          const long st = static_cast<long>(t + q) - static_cast<long>(pad_left);
          if (st < 0 || st >= static_cast<long>(steps)) continue;
          simd::kernels<T>().axpy(ch, T{1}, src + q * ch, gx.data() + row_of(static_cast<std::size_t>(st), b) * ch);
        }
      }
    }
  });
}

// a[B*S, C] (segment-major) + q[B, C]: every row of segment b gets q.row(b).
template <class T>
Var<T> add_segment_broadcast(const Var<T>& a, const Var<T>& q, std::size_t seg_len) {
  detail::require(q.cols() == a.cols() && q.rows() * seg_len == a.rows(), "add_segment_broadcast: shape");
  const std::size_t B = q.rows(), C = a.cols();
  Matrix<T> c = a.value();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < seg_len; ++s)
      for (std::size_t j = 0; j < C; ++j) c(b * seg_len + s, j) += q.value()(b, j);
  return detail::make_op<T>(std::move(c), {&a, &q}, [a, q, B, C, seg_len](const Matrix<T>& g) mutable {
    if (a.requires_grad()) simd::kernels<T>().axpy(g.size(), T{1}, g.data(), a.grad_buffer().data());
    if (q.requires_grad()) {
      Matrix<T>& gq = q.grad_buffer();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < seg_len; ++s)
          simd::kernels<T>().axpy(C, T{1}, g.data() + (b * seg_len + s) * C, gq.data() + b * C);
    }
  });
}

// out[b] = sum_s w[b, s] * mem[b*S + s]  (w: [B,S], mem: [B*S, D]) -> [B, D]
template <class T>
Var<T> segment_weighted_sum(const Var<T>& w, const Var<T>& mem) {
  const std::size_t B = w.rows(), S = w.cols(), D = mem.cols();
  detail::require(mem.rows() == B * S, "segment_weighted_sum: shape");
  Matrix<T> c(B, D);
  const auto& K = simd::kernels<T>();
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < S; ++s) K.axpy(D, w.value()(b, s), mem.value().data() + (b * S + s) * D, c.data() + b * D);
  return detail::make_op<T>(std::move(c), {&w, &mem}, [w, mem, B, S, D](const Matrix<T>& g) mutable {
    const auto& K = simd::kernels<T>();
    if (w.requires_grad()) {
      Matrix<T>& gw = w.grad_buffer();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < S; ++s) gw(b, s) += K.dot(D, g.data() + b * D, mem.value().data() + (b * S + s) * D);
    }
    if (mem.requires_grad()) {
      Matrix<T>& gm = mem.grad_buffer();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t s = 0; s < S; ++s) K.axpy(D, w.value()(b, s), g.data() + b * D, gm.data() + (b * S + s) * D);
    }
  });
}

}  // namespace clonecraft::nn
