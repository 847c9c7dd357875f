#include "clonecraft/nn/params.hpp"

#include <cmath>
#include <cstring>

#include "clonecraft/nn/rnn_ops.hpp"

namespace clonecraft::nn {

VarF ParameterSet::add(std::string name, MatrixF init) {
  if (contains(name)) throw Error(Errc::ConfigError, "duplicate parameter name: " + name);
  VarF v = VarF::parameter(std::move(init));
  entries_.push_back({std::move(name), v});
  return v;
}

const VarF& ParameterSet::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.var;
  throw Error(Errc::ConfigError, "unknown parameter: " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.var.value().size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.var.node()->zero_grad();
}

std::uint64_t ParameterSet::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& e : entries_) {
    mix(e.name.data(), e.name.size());
    const std::uint64_t shape[2] = {e.var.rows(), e.var.cols()};
    mix(shape, sizeof(shape));
    mix(e.var.value().data(), e.var.value().size() * sizeof(float));
  }
  return h;
}

MatrixF glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                       std::mt19937_64& rng) {
  const float a = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
  std::uniform_real_distribution<float> dist(-a, a);
  MatrixF m(rows, cols);
  for (auto& v : m.storage()) v = dist(rng);
  return m;
}

Linear Linear::make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                    std::mt19937_64& rng, bool zero_init) {
  Linear l;
  l.weight = ps.add(name + ".weight", zero_init ? MatrixF(in, out) : glorot_uniform(in, out, in, out, rng));
  l.bias = ps.add(name + ".bias", MatrixF(1, out));
  return l;
}

Conv1d Conv1d::make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                    std::size_t kernel, std::mt19937_64& rng) {
  Conv1d c;
  c.kernel = kernel;
  c.weight = ps.add(name + ".weight", glorot_uniform(kernel * in, out, kernel * in, out, rng));
  c.bias = ps.add(name + ".bias", MatrixF(1, out));
  return c;
}

VarF Conv1d::operator()(const VarF& x, std::size_t steps, std::size_t batch, bool time_major) const {
  return affine(im2col(x, steps, batch, kernel, kernel / 2, time_major), weight, bias);
}

GruLayer GruLayer::make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
                        std::mt19937_64& rng) {
  GruLayer g;
  g.w_ih = ps.add(name + ".w_ih", glorot_uniform(in, 3 * hidden, in, hidden, rng));
  g.b_ih = ps.add(name + ".b_ih", MatrixF(1, 3 * hidden));
  g.w_hh = ps.add(name + ".w_hh", glorot_uniform(hidden, 3 * hidden, hidden, hidden, rng));
  g.b_hh = ps.add(name + ".b_hh", MatrixF(1, 3 * hidden));
  return g;
}

VarF GruLayer::operator()(const VarF& x, std::size_t steps, std::size_t batch) const {
  return gru_sequence(affine(x, w_ih, b_ih), w_hh, b_hh, VarF{}, steps, batch);
}

LstmLayer LstmLayer::make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
                          std::mt19937_64& rng) {
  LstmLayer l;
  l.w_ih = ps.add(name + ".w_ih", glorot_uniform(in, 4 * hidden, in, hidden, rng));
  MatrixF bias(1, 4 * hidden);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) bias[j] = 1.0f;  // forget gate
  l.b_ih = ps.add(name + ".b_ih", std::move(bias));
  l.w_hh = ps.add(name + ".w_hh", glorot_uniform(hidden, 4 * hidden, hidden, hidden, rng));
  l.b_hh = ps.add(name + ".b_hh", MatrixF(1, 4 * hidden));
  return l;
}

VarF LstmLayer::operator()(const VarF& x, std::size_t steps, std::size_t batch) const {
  return lstm_sequence(affine(x, w_ih, b_ih), w_hh, b_hh, steps, batch);
}

VarF dropout(const VarF& x, float p, std::mt19937_64& rng) {
  if (p <= 0.0f) return x;
  std::bernoulli_distribution keep(1.0 - p);
  MatrixF mask(x.rows(), x.cols());
  const float s = 1.0f / (1.0f - p);
  for (auto& v : mask.storage()) v = keep(rng) ? s : 0.0f;
  return hadamard(x, VarF::constant(std::move(mask)));
}

}  // namespace clonecraft::nn
