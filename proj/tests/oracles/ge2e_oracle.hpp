#pragma once

// Brute-force GE2E: explicit loops, naive centroid re-summation. Shares no
// code with the library implementation.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace clonecraft::testing {

// emb[j][i][d]
using Batch = std::vector<std::vector<std::vector<double>>>;

inline double oracle_cos(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    ab += a[d] * b[d];
    aa += a[d] * a[d];
    bb += b[d] * b[d];
  }
  return ab / std::sqrt(aa * bb);
}

// S[j][i][k]
inline std::vector<std::vector<std::vector<double>>> oracle_similarity(const Batch& e, double w, double b) {
  const std::size_t N = e.size(), M = e[0].size(), D = e[0][0].size();
  std::vector<std::vector<std::vector<double>>> S(N, std::vector<std::vector<double>>(M, std::vector<double>(N)));
  for (std::size_t j = 0; j < N; ++j) {
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t k = 0; k < N; ++k) {
        std::vector<double> c(D, 0.0);
        std::size_t count = 0;
        for (std::size_t m = 0; m < M; ++m) {
          if (k == j && m == i) continue;
          for (std::size_t d = 0; d < D; ++d) c[d] += e[k][m][d];
          ++count;
        }
        for (double& v : c) v /= static_cast<double>(count);
        S[j][i][k] = w * oracle_cos(e[j][i], c) + b;
      }
    }
  }
  return S;
}

inline double ge2e_loss_oracle(const Batch& e, double w, double b) {
  const auto S = oracle_similarity(e, w, b);
  double total = 0.0;
  for (std::size_t j = 0; j < S.size(); ++j) {
    for (std::size_t i = 0; i < S[j].size(); ++i) {
      double z = 0.0;
      for (double s : S[j][i]) z += std::exp(s);
      total += -S[j][i][j] + std::log(z);
    }
  }
  return total;
}

}  // namespace clonecraft::testing
