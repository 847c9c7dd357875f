#pragma once

// Softmax-variant GE2E objective over a batch of N speakers x M utterances.
// Embeddings are stacked speaker-major: row j*M + i holds e_ji.

#include <cmath>

#include "clonecraft/nn/params.hpp"

namespace clonecraft::ge2e {

using nn::Var;

inline constexpr float kMinW = 1e-4f;

namespace detail {

inline void check_batch(std::size_t rows, std::size_t n, std::size_t m) {
  if (n < 2 || m < 2) throw Error(Errc::BatchTooSmall, "GE2E needs at least 2 speakers and 2 utterances each");
  if (rows != n * m) throw Error(Errc::ShapeError, "GE2E batch rows != N*M");
}

// [N, N*M]: averages each speaker's block of rows.
template <class T>
Matrix<T> averaging(std::size_t n, std::size_t m) {
  Matrix<T> a(n, n * m);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) a(j, j * m + i) = T{1} / static_cast<T>(m);
  return a;
}

// [N*M, N*M]: row (j,i) averages speaker j's rows other than i.
template <class T>
Matrix<T> leave_one_out(std::size_t n, std::size_t m) {
  Matrix<T> a(n * m, n * m);
  const T w = T{1} / static_cast<T>(m - 1);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < m; ++k)
        if (k != i) a(j * m + i, j * m + k) = w;
  return a;
}

// [N*M, N] one-hot of each row's own speaker.
template <class T>
Matrix<T> own_speaker(std::size_t n, std::size_t m) {
  Matrix<T> a(n * m, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) a(j * m + i, j) = T{1};
  return a;
}

}  // namespace detail

// c_k = mean of speaker k's embeddings -> [N, D]
template <class T>
Var<T> centroids(const Var<T>& e, std::size_t n, std::size_t m) {
  detail::check_batch(e.rows(), n, m);
  return nn::matmul(Var<T>::constant(detail::averaging<T>(n, m)), e);
}

// Row (j,i) is speaker j's centroid without e_ji -> [N*M, D]
template <class T>
Var<T> centroids_leave_one_out(const Var<T>& e, std::size_t n, std::size_t m) {
  detail::check_batch(e.rows(), n, m);
  return nn::matmul(Var<T>::constant(detail::leave_one_out<T>(n, m)), e);
}

// S[(j,i), k] = w cos(e_ji, c_k) + b, with the leave-one-out centroid when k == j.
// w, b are 1x1. Returns [N*M, N].
template <class T>
Var<T> similarity_matrix(const Var<T>& e, std::size_t n, std::size_t m, const Var<T>& w, const Var<T>& b) {
  if (!(w.item() > T{0})) throw Error(Errc::NumericalError, "GE2E scale w must be positive");
  const Matrix<T> own = detail::own_speaker<T>(n, m);
  Matrix<T> other(own.rows(), own.cols());
  for (std::size_t i = 0; i < own.size(); ++i) other[i] = T{1} - own[i];

  const Var<T> en = nn::row_normalize(e);
  const Var<T> cos_full = nn::matmul_nt(en, nn::row_normalize(centroids(e, n, m)));
  const Var<T> cos_loo = nn::row_dot(en, nn::row_normalize(centroids_leave_one_out(e, n, m)));
  const Var<T> cos = nn::add(nn::hadamard(cos_full, Var<T>::constant(other)),
                             nn::mul_col(Var<T>::constant(own), cos_loo));
  return nn::add_scalar(nn::mul_scalar(cos, w), b);
}

// Sum over rows of -S[(j,i), j] + log sum_k exp S[(j,i), k].
template <class T>
Var<T> ge2e_loss(const Var<T>& s, std::size_t n, std::size_t m) {
  if (s.rows() != n * m || s.cols() != n) throw Error(Errc::ShapeError, "GE2E similarity shape");
  for (T v : s.value().storage())
    if (!std::isfinite(v)) throw Error(Errc::NumericalError, "non-finite similarity entry");
  const Var<T> target = nn::sum_all(nn::hadamard(s, Var<T>::constant(detail::own_speaker<T>(n, m))));
  return nn::sub(nn::sum_all(nn::row_logsumexp(s)), target);
}

template <class T>
Var<T> ge2e_total(const Var<T>& e, std::size_t n, std::size_t m, const Var<T>& w, const Var<T>& b) {
  return ge2e_loss(similarity_matrix(e, n, m, w, b), n, m);
}

// Learnable scale and bias, initialised to w = 10, b = -5.
class Ge2eParams {
 public:
  explicit Ge2eParams(float w = 10.0f, float b = -5.0f);

  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const nn::VarF& w() const { return w_; }
  const nn::VarF& b() const { return b_; }
  // Keeps w >= kMinW after an optimiser update.
  void clamp();

 private:
  nn::ParameterSet params_;
  nn::VarF w_, b_;
};

}  // namespace clonecraft::ge2e
