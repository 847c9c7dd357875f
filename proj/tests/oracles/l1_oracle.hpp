#pragma once

#include <cmath>

#include "clonecraft/core/matrix.hpp"

namespace clonecraft::testing {

inline double mean_abs_diff(const MatrixF& a, const MatrixF& b) {
  double s = 0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) s += std::fabs(static_cast<double>(a(r, c)) - b(r, c));
  return s / static_cast<double>(a.rows() * a.cols());
}

}  // namespace clonecraft::testing
