#pragma once

// Fused recurrent sequence ops. Inputs are time-major: row t*batch + b holds
// step t of sequence b. The input-to-hidden product (including its bias) is
// computed by the caller for all steps at once; these ops run the recurrence.

#include <cmath>
#include <vector>

#include "clonecraft/nn/autograd.hpp"

namespace clonecraft::nn {

namespace detail {
template <class T>
inline T sigm(T x) {
  return T{1} / (T{1} + std::exp(-x));
}
}  // namespace detail

// GRU recurrence, gate order [reset | update | candidate]:
//   r = s(xr + h Wr + br), z = s(xz + h Wz + bz)
//   n = tanh(xn + r * (h Wn + bn)),  h' = (1 - z) * n + z * h
// xg: [steps*batch, 3H], w_hh: [H, 3H], b_hh: [1, 3H], h0: [batch, H] or invalid (zeros).
// Returns all hidden states [steps*batch, H].
template <class T>
Var<T> gru_sequence(const Var<T>& xg, const Var<T>& w_hh, const Var<T>& b_hh, const Var<T>& h0,
                    std::size_t steps, std::size_t batch) {
  const std::size_t H = w_hh.rows();
  detail::require(w_hh.cols() == 3 * H && b_hh.cols() == 3 * H && xg.cols() == 3 * H,
                  "gru_sequence: gate width mismatch");
  detail::require(xg.rows() == steps * batch, "gru_sequence: rows != steps*batch");
  if (h0.valid()) detail::require(h0.rows() == batch && h0.cols() == H, "gru_sequence: h0 shape");
  const auto& K = simd::kernels<T>();

  Matrix<T> hs(steps * batch, H);
  // Per step caches: r, z, n, and (h Wn + bn).
  Matrix<T> r(steps * batch, H), z(steps * batch, H), n(steps * batch, H), ghn(steps * batch, H);
  Matrix<T> hprev0 = h0.valid() ? h0.value() : Matrix<T>(batch, H);
  Matrix<T> gh(batch, 3 * H);
  for (std::size_t t = 0; t < steps; ++t) {
    const T* hp = t == 0 ? hprev0.data() : hs.data() + (t - 1) * batch * H;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < 3 * H; ++j) gh(b, j) = b_hh.value()[j];
    K.gemm_nn(batch, 3 * H, H, hp, w_hh.value().data(), gh.data());
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t row = t * batch + b;
      const T* x = xg.value().data() + row * 3 * H;
      const T* g = gh.data() + b * 3 * H;
      for (std::size_t j = 0; j < H; ++j) {
        const T rv = detail::sigm(x[j] + g[j]);
        const T zv = detail::sigm(x[H + j] + g[H + j]);
        const T nv = std::tanh(x[2 * H + j] + rv * g[2 * H + j]);
        r(row, j) = rv;
        z(row, j) = zv;
        n(row, j) = nv;
        ghn(row, j) = g[2 * H + j];
        hs(row, j) = (T{1} - zv) * nv + zv * hp[b * H + j];
      }
    }
  }

  Matrix<T> hs_copy = hs;
  return detail::make_op<T>(
      std::move(hs), {&xg, &w_hh, &b_hh, &h0},
      [xg, w_hh, b_hh, h0, steps, batch, H, r = std::move(r), z = std::move(z), n = std::move(n),
       ghn = std::move(ghn), hs = std::move(hs_copy), hprev0 = std::move(hprev0)](const Matrix<T>& gout) mutable {
        const auto& K = simd::kernels<T>();
        Matrix<T> dh(batch, H);
        Matrix<T> dgh(batch, 3 * H);
        Matrix<T>* gx = xg.requires_grad() ? &xg.grad_buffer() : nullptr;
        Matrix<T>* gw = w_hh.requires_grad() ? &w_hh.grad_buffer() : nullptr;
        Matrix<T>* gb = b_hh.requires_grad() ? &b_hh.grad_buffer() : nullptr;
        for (std::size_t tt = steps; tt-- > 0;) {
          const T* hp = tt == 0 ? hprev0.data() : hs.data() + (tt - 1) * batch * H;
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t row = tt * batch + b;
            for (std::size_t j = 0; j < H; ++j) {
              const T d = dh(b, j) + gout(row, j);
              const T rv = r(row, j), zv = z(row, j), nv = n(row, j);
              const T dn_pre = d * (T{1} - zv) * (T{1} - nv * nv);
              const T dz_pre = d * (hp[b * H + j] - nv) * zv * (T{1} - zv);
              const T dr_pre = dn_pre * ghn(row, j) * rv * (T{1} - rv);
              dgh(b, j) = dr_pre;
              dgh(b, H + j) = dz_pre;
              dgh(b, 2 * H + j) = dn_pre * rv;
              if (gx) {
                (*gx)(row, j) += dr_pre;
                (*gx)(row, H + j) += dz_pre;
                (*gx)(row, 2 * H + j) += dn_pre;
              }
              dh(b, j) = d * zv;
            }
          }
          if (gw) K.gemm_tn(H, 3 * H, batch, hp, dgh.data(), gw->data());
          if (gb)
            for (std::size_t b = 0; b < batch; ++b) K.axpy(3 * H, T{1}, dgh.data() + b * 3 * H, gb->data());
          K.gemm_nt(batch, H, 3 * H, dgh.data(), w_hh.value().data(), dh.data());
        }
        if (h0.valid() && h0.requires_grad()) K.axpy(dh.size(), T{1}, dh.data(), h0.grad_buffer().data());
      });
}

// Single GRU step: xg [batch, 3H], h [batch, H] -> h' [batch, H].
template <class T>
Var<T> gru_cell(const Var<T>& xg, const Var<T>& h, const Var<T>& w_hh, const Var<T>& b_hh) {
  return gru_sequence(xg, w_hh, b_hh, h, 1, h.rows());
}

// LSTM recurrence, gate order [input | forget | cell | output]:
//   c' = f * c + i * g,  h' = o * tanh(c')
// xg: [steps*batch, 4H], w_hh: [H, 4H], b_hh: [1, 4H]. Zero initial state.
// Returns all hidden states [steps*batch, H].
template <class T>
Var<T> lstm_sequence(const Var<T>& xg, const Var<T>& w_hh, const Var<T>& b_hh, std::size_t steps,
                     std::size_t batch) {
  const std::size_t H = w_hh.rows();
  detail::require(w_hh.cols() == 4 * H && b_hh.cols() == 4 * H && xg.cols() == 4 * H,
                  "lstm_sequence: gate width mismatch");
  detail::require(xg.rows() == steps * batch, "lstm_sequence: rows != steps*batch");
  const auto& K = simd::kernels<T>();

  Matrix<T> hs(steps * batch, H), cs(steps * batch, H);
  Matrix<T> gates(steps * batch, 4 * H);  // post-activation i, f, g, o
  Matrix<T> zeros(batch, H);
  Matrix<T> pre(batch, 4 * H);
  for (std::size_t t = 0; t < steps; ++t) {
    const T* hp = t == 0 ? zeros.data() : hs.data() + (t - 1) * batch * H;
    const T* cp = t == 0 ? zeros.data() : cs.data() + (t - 1) * batch * H;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < 4 * H; ++j) pre(b, j) = b_hh.value()[j] + xg.value()(t * batch + b, j);
    K.gemm_nn(batch, 4 * H, H, hp, w_hh.value().data(), pre.data());
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t row = t * batch + b;
      for (std::size_t j = 0; j < H; ++j) {
        const T iv = detail::sigm(pre(b, j));
        const T fv = detail::sigm(pre(b, H + j));
        const T gv = std::tanh(pre(b, 2 * H + j));
        const T ov = detail::sigm(pre(b, 3 * H + j));
        const T cv = fv * cp[b * H + j] + iv * gv;
        gates(row, j) = iv;
        gates(row, H + j) = fv;
        gates(row, 2 * H + j) = gv;
        gates(row, 3 * H + j) = ov;
        cs(row, j) = cv;
        hs(row, j) = ov * std::tanh(cv);
      }
    }
  }

  Matrix<T> hs_copy = hs;
  return detail::make_op<T>(
      std::move(hs), {&xg, &w_hh, &b_hh},
      [xg, w_hh, b_hh, steps, batch, H, gates = std::move(gates), cs = std::move(cs),
       hs = std::move(hs_copy)](const Matrix<T>& gout) mutable {
        const auto& K = simd::kernels<T>();
        Matrix<T> dh(batch, H), dc(batch, H), zeros(batch, H);
        Matrix<T> dg(batch, 4 * H);
        Matrix<T>* gx = xg.requires_grad() ? &xg.grad_buffer() : nullptr;
        Matrix<T>* gw = w_hh.requires_grad() ? &w_hh.grad_buffer() : nullptr;
        Matrix<T>* gb = b_hh.requires_grad() ? &b_hh.grad_buffer() : nullptr;
        for (std::size_t tt = steps; tt-- > 0;) {
          const T* hp = tt == 0 ? zeros.data() : hs.data() + (tt - 1) * batch * H;
          const T* cp = tt == 0 ? zeros.data() : cs.data() + (tt - 1) * batch * H;
          for (std::size_t b = 0; b < batch; ++b) {
            const std::size_t row = tt * batch + b;
            for (std::size_t j = 0; j < H; ++j) {
              const T iv = gates(row, j), fv = gates(row, H + j);
              const T gv = gates(row, 2 * H + j), ov = gates(row, 3 * H + j);
              const T tc = std::tanh(cs(row, j));
              const T d = dh(b, j) + gout(row, j);
              const T dcv = dc(b, j) + d * ov * (T{1} - tc * tc);
              dg(b, j) = dcv * gv * iv * (T{1} - iv);
              dg(b, H + j) = dcv * cp[b * H + j] * fv * (T{1} - fv);
              dg(b, 2 * H + j) = dcv * iv * (T{1} - gv * gv);
              dg(b, 3 * H + j) = d * tc * ov * (T{1} - ov);
              dc(b, j) = dcv * fv;
            }
          }
          if (gx) K.axpy(batch * 4 * H, T{1}, dg.data(), gx->data() + tt * batch * 4 * H);
          if (gw) K.gemm_tn(H, 4 * H, batch, hp, dg.data(), gw->data());
          if (gb)
            for (std::size_t b = 0; b < batch; ++b) K.axpy(4 * H, T{1}, dg.data() + b * 4 * H, gb->data());
          dh.fill(T{0});
          K.gemm_nt(batch, H, 4 * H, dg.data(), w_hh.value().data(), dh.data());
        }
      });
}

}  // namespace clonecraft::nn
