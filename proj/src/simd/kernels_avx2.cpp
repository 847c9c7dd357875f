// Compiled with -mavx2 -mfma; only reached after detect_isa() confirms support.
#include <immintrin.h>

#include "clonecraft/simd/kernels.hpp"

namespace clonecraft::simd::avx2 {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

template <>
struct Vec<double> {
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
  }
};

// Register-blocked update C[i0:i0+R, j0:j0+V*W] += A_blk * B_blk where A is
// addressed as a[i * a_row + p * a_col]; covers both the nn and tn layouts.
template <class T, std::size_t R, std::size_t V>
inline void block(std::size_t i0, std::size_t j0, std::size_t n, std::size_t k, const T* a,
                  std::size_t a_row, std::size_t a_col, const T* b, T* c) {
  using X = Vec<T>;
  typename X::reg acc[R][V];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < V; ++v) acc[r][v] = X::zero();
  for (std::size_t p = 0; p < k; ++p) {
    typename X::reg bv[V];
    for (std::size_t v = 0; v < V; ++v) bv[v] = X::load(b + p * n + j0 + v * X::width);
    for (std::size_t r = 0; r < R; ++r) {
      const typename X::reg av = X::set1(a[(i0 + r) * a_row + p * a_col]);
      for (std::size_t v = 0; v < V; ++v) acc[r][v] = X::fma(av, bv[v], acc[r][v]);
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t v = 0; v < V; ++v) {
      T* dst = c + (i0 + r) * n + j0 + v * X::width;
      X::store(dst, X::add(X::load(dst), acc[r][v]));
    }
  }
}

template <class T, std::size_t R>
inline void row_panel(std::size_t i0, std::size_t n, std::size_t k, const T* a, std::size_t a_row,
                      std::size_t a_col, const T* b, T* c) {
  constexpr std::size_t W = Vec<T>::width;
  std::size_t j = 0;
  for (; j + 2 * W <= n; j += 2 * W) block<T, R, 2>(i0, j, n, k, a, a_row, a_col, b, c);
  for (; j + W <= n; j += W) block<T, R, 1>(i0, j, n, k, a, a_row, a_col, b, c);
  if (j < n) {
    for (std::size_t r = 0; r < R; ++r) {
      T* ci = c + (i0 + r) * n;
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = a[(i0 + r) * a_row + p * a_col];
        const T* bp = b + p * n;
        for (std::size_t jj = j; jj < n; ++jj) ci[jj] += aip * bp[jj];
      }
    }
  }
}

template <class T>
void gemm_strided(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t a_row,
                  std::size_t a_col, const T* b, T* c) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_panel<T, 4>(i, n, k, a, a_row, a_col, b, c);
  for (; i < m; ++i) row_panel<T, 1>(i, n, k, a, a_row, a_col, b, c);
}

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  gemm_strided<T>(m, n, k, a, k, 1, b, c);
}

template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  gemm_strided<T>(m, n, k, a, 1, m, b, c);
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  using X = Vec<T>;
  constexpr std::size_t W = X::width;
  typename X::reg acc0 = X::zero(), acc1 = X::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    acc0 = X::fma(X::load(x + i), X::load(y + i), acc0);
    acc1 = X::fma(X::load(x + i + W), X::load(y + i + W), acc1);
  }
  for (; i + W <= n; i += W) acc0 = X::fma(X::load(x + i), X::load(y + i), acc0);
  T s = X::hsum(X::add(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  using X = Vec<T>;
  constexpr std::size_t W = X::width;
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const T* b0 = b + j * k;
      const T* b1 = b0 + k;
      const T* b2 = b1 + k;
      const T* b3 = b2 + k;
      typename X::reg s0 = X::zero(), s1 = X::zero(), s2 = X::zero(), s3 = X::zero();
      std::size_t p = 0;
      for (; p + W <= k; p += W) {
        const typename X::reg av = X::load(ai + p);
        s0 = X::fma(av, X::load(b0 + p), s0);
        s1 = X::fma(av, X::load(b1 + p), s1);
        s2 = X::fma(av, X::load(b2 + p), s2);
        s3 = X::fma(av, X::load(b3 + p), s3);
      }
      T r0 = X::hsum(s0), r1 = X::hsum(s1), r2 = X::hsum(s2), r3 = X::hsum(s3);
      for (; p < k; ++p) {
        r0 += ai[p] * b0[p];
        r1 += ai[p] * b1[p];
        r2 += ai[p] * b2[p];
        r3 += ai[p] * b3[p];
      }
      T* ci = c + i * n + j;
      ci[0] += r0;
      ci[1] += r1;
      ci[2] += r2;
      ci[3] += r3;
    }
    for (; j < n; ++j) c[i * n + j] += dot<T>(k, ai, b + j * k);
  }
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using X = Vec<T>;
  constexpr std::size_t W = X::width;
  const typename X::reg av = X::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) X::store(y + i, X::fma(av, X::load(x + i), X::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
constexpr KernelTable<T> kTable{&gemm_nn<T>, &gemm_tn<T>, &gemm_nt<T>, &dot<T>, &axpy<T>};

}  // namespace

template <class T>
const KernelTable<T>& table() {
  return kTable<T>;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace clonecraft::simd::avx2
