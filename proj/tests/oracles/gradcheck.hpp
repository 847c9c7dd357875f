#pragma once

// Central-difference gradient check in double precision, test-only.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "clonecraft/nn/autograd.hpp"

namespace clonecraft::testing {

using VarD = nn::Var<double>;

inline MatrixD random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  MatrixD m(r, c);
  for (auto& v : m.storage()) v = d(rng);
  return m;
}

// Builds loss = sum(f(inputs) * probe) and returns the worst relative error
// between analytic and numeric gradients over all inputs. Relative error is
// |a - n| / max(|a|, |n|, floor).
inline double max_grad_error(const std::function<VarD(const std::vector<VarD>&)>& f,
                             std::vector<MatrixD> inputs, std::mt19937_64& rng, double h = 1e-6,
                             double floor = 1e-6) {
  std::vector<VarD> vars;
  for (auto& m : inputs) vars.push_back(VarD::parameter(m));
  MatrixD probe;
  double worst = 0.0;
  {
    nn::Tape<double> tape;
    nn::TapeScope<double> scope(tape);
    VarD out = f(vars);
    probe = random_matrix(out.rows(), out.cols(), rng);
    VarD loss = nn::sum_all(nn::hadamard(out, VarD::constant(probe)));
    tape.backward(loss);
  }
  auto eval = [&](const std::vector<MatrixD>& xs) {
    std::vector<VarD> vs;
    for (const auto& m : xs) vs.push_back(VarD::constant(m));
    VarD out = f(vs);
    double s = 0.0;
    for (std::size_t i = 0; i < out.value().size(); ++i) s += out.value()[i] * probe[i];
    return s;
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      std::vector<MatrixD> plus = inputs, minus = inputs;
      plus[k][i] += h;
      minus[k][i] -= h;
      const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
      const double analytic = vars[k].node()->has_grad() ? vars[k].grad()[i] : 0.0;
      const double denom = std::max({std::abs(numeric), std::abs(analytic), floor});
      worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
  }
  return worst;
}

}  // namespace clonecraft::testing
