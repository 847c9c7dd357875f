#include <random>

#include "../oracles/gradcheck.hpp"
#include "clonecraft/nn/rnn_ops.hpp"
#include "doctest.h"

using namespace clonecraft;
using namespace clonecraft::nn;
using clonecraft::testing::max_grad_error;
using clonecraft::testing::random_matrix;
using clonecraft::testing::VarD;

namespace {
constexpr double kTol = 1e-6;
}

TEST_CASE("gradients of products match finite differences") {
  std::mt19937_64 rng(1);
  CHECK(max_grad_error([](const auto& v) { return matmul(v[0], v[1]); },
                       {random_matrix(3, 4, rng), random_matrix(4, 5, rng)}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return matmul_nt(v[0], v[1]); },
                       {random_matrix(3, 4, rng), random_matrix(6, 4, rng)}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return affine(v[0], v[1], v[2]); },
                       {random_matrix(5, 3, rng), random_matrix(3, 9, rng), random_matrix(1, 9, rng)},
                       rng) < kTol);
}

TEST_CASE("gradients of elementwise ops match finite differences") {
  std::mt19937_64 rng(2);
  auto a = random_matrix(4, 3, rng);
  auto b = random_matrix(4, 3, rng);
  CHECK(max_grad_error([](const auto& v) { return add(v[0], v[1]); }, {a, b}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return sub(v[0], v[1]); }, {a, b}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return hadamard(v[0], v[1]); }, {a, b}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return add_row(v[0], v[1]); }, {a, random_matrix(1, 3, rng)}, rng) <
        kTol);
  CHECK(max_grad_error([](const auto& v) { return scale(v[0], 2.5); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return mul_scalar(v[0], v[1]); }, {a, random_matrix(1, 1, rng)},
                       rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return add_scalar(v[0], v[1]); }, {a, random_matrix(1, 1, rng)},
                       rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return sigmoid(v[0]); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return nn::tanh(v[0]); }, {a}, rng) < kTol);
  // keep away from the kink at zero
  auto away = random_matrix(4, 3, rng, 0.1, 1.0);
  for (std::size_t i = 0; i < away.size(); i += 2) away[i] = -away[i];
  CHECK(max_grad_error([](const auto& v) { return relu(v[0]); }, {away}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return nn::abs(v[0]); }, {away}, rng) < kTol);
}

TEST_CASE("gradients of reductions match finite differences") {
  std::mt19937_64 rng(3);
  auto a = random_matrix(5, 4, rng);
  auto b = random_matrix(5, 4, rng);
  CHECK(max_grad_error([](const auto& v) { return sum_all(v[0]); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return mean_all(v[0]); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return row_dot(v[0], v[1]); }, {a, b}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return mul_col(v[0], v[1]); }, {a, random_matrix(5, 1, rng)}, rng) <
        kTol);
  CHECK(max_grad_error([](const auto& v) { return row_normalize(v[0]); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return row_logsumexp(v[0]); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return softmax_rows(v[0]); }, {a}, rng) < kTol);
  MatrixD targets(5, 4), weights(5, 4, 1.0);
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = (i % 3 == 0) ? 1.0 : 0.0;
  weights[3] = 0.0;
  CHECK(max_grad_error([&](const auto& v) { return bce_with_logits(v[0], targets, weights); }, {a}, rng) < kTol);
}

TEST_CASE("gradients of structural ops match finite differences") {
  std::mt19937_64 rng(4);
  auto a = random_matrix(6, 4, rng);
  auto b = random_matrix(6, 2, rng);
  auto c = random_matrix(3, 4, rng);
  CHECK(max_grad_error([](const auto& v) { return concat_cols(std::vector<VarD>{v[0], v[1]}); }, {a, b}, rng) <
        kTol);
  CHECK(max_grad_error([](const auto& v) { return concat_rows(std::vector<VarD>{v[0], v[1]}); }, {a, c}, rng) <
        kTol);
  CHECK(max_grad_error([](const auto& v) { return slice_cols(v[0], 1, 3); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return slice_rows(v[0], 2, 5); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return gather_rows(v[0], {5, 0, 0, 3}); }, {a}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return reshape(v[0], 3, 8); }, {a}, rng) < kTol);
  for (bool tm : {true, false}) {
    CHECK(max_grad_error([tm](const auto& v) { return im2col(v[0], 3, 2, 3, 1, tm); }, {a}, rng) < kTol);
  }
  CHECK(max_grad_error([](const auto& v) { return add_segment_broadcast(v[0], v[1], 3); },
                       {a, random_matrix(2, 4, rng)}, rng) < kTol);
  CHECK(max_grad_error([](const auto& v) { return segment_weighted_sum(v[0], v[1]); },
                       {random_matrix(2, 3, rng), a}, rng) < kTol);
}

TEST_CASE("im2col places neighbours kernel-major with zero padding") {
  MatrixD x(3, 1, std::vector<double>{1, 2, 3});
  auto y = im2col(VarD::constant(x), 3, 1, 3, 1, true);
  const std::vector<double> expect{0, 1, 2, 1, 2, 3, 2, 3, 0};
  CHECK(y.value().storage() == expect);
}

TEST_CASE("fused GRU and LSTM recurrences have correct gradients") {
  std::mt19937_64 rng(5);
  const std::size_t H = 3, B = 2, T = 4;
  auto xg = random_matrix(T * B, 3 * H, rng);
  auto whh = random_matrix(H, 3 * H, rng);
  auto bhh = random_matrix(1, 3 * H, rng);
  auto h0 = random_matrix(B, H, rng);
  CHECK(max_grad_error([&](const auto& v) { return gru_sequence(v[0], v[1], v[2], VarD{}, T, B); },
                       {xg, whh, bhh}, rng) < kTol);
  CHECK(max_grad_error([&](const auto& v) { return gru_sequence(v[0], v[1], v[2], v[3], T, B); },
                       {xg, whh, bhh, h0}, rng) < kTol);
  CHECK(max_grad_error([&](const auto& v) { return gru_cell(v[0], v[1], v[2], v[3]); },
                       {random_matrix(B, 3 * H, rng), h0, whh, bhh}, rng) < kTol);
  auto xl = random_matrix(T * B, 4 * H, rng);
  auto wl = random_matrix(H, 4 * H, rng);
  auto bl = random_matrix(1, 4 * H, rng);
  CHECK(max_grad_error([&](const auto& v) { return lstm_sequence(v[0], v[1], v[2], T, B); }, {xl, wl, bl}, rng) <
        kTol);
}

TEST_CASE("GRU step matches the gate equations written out by hand") {
  // H = 1, B = 1, one step from h = 0.5 with all recurrent weights 1, biases 0.
  MatrixD xg(1, 3, std::vector<double>{0.1, -0.2, 0.3});
  MatrixD whh(1, 3, 1.0), bhh(1, 3, 0.0), h(1, 1, 0.5);
  auto out = gru_cell(VarD::constant(xg), VarD::constant(h), VarD::constant(whh), VarD::constant(bhh));
  const double r = 1.0 / (1.0 + std::exp(-(0.1 + 0.5)));
  const double z = 1.0 / (1.0 + std::exp(-(-0.2 + 0.5)));
  const double n = std::tanh(0.3 + r * 0.5);
  CHECK(out.item() == doctest::Approx((1 - z) * n + z * 0.5).epsilon(1e-12));
}

TEST_CASE("ops outside a tape do not record closures") {
  auto p = VarD::parameter(MatrixD(2, 2, 1.0));
  auto y = matmul(p, p);
  CHECK_FALSE(y.requires_grad());
  Tape<double> tape;
  {
    TapeScope<double> scope(tape);
    auto z = matmul(p, p);
    CHECK(z.requires_grad());
  }
  CHECK(tape.size() == 1);
}

TEST_CASE("row_normalize rejects zero rows") {
  auto z = VarD::constant(MatrixD(1, 3, 0.0));
  CHECK_THROWS_AS(row_normalize(z), Error);
}
