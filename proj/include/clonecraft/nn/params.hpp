#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "clonecraft/nn/autograd.hpp"

namespace clonecraft::nn {

using VarF = Var<float>;

// Ordered collection of named trainable tensors. Order is insertion order
// and defines checkpoint layout.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    VarF var;
  };

  VarF add(std::string name, MatrixF init);
  const VarF& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  std::size_t scalar_count() const;
  void zero_grad();
  // FNV-1a over names, shapes and raw value bytes.
  std::uint64_t fingerprint() const;

 private:
  std::vector<Entry> entries_;
};

// Glorot-style uniform init: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
MatrixF glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                       std::mt19937_64& rng);

struct Linear {
  VarF weight;  // [in, out]
  VarF bias;    // [1, out]

  static Linear make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                     std::mt19937_64& rng, bool zero_init = false);
  VarF operator()(const VarF& x) const { return affine(x, weight, bias); }
  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
};

// 1-D convolution over time with same padding, stride 1.
struct Conv1d {
  VarF weight;  // [kernel * in, out]
  VarF bias;    // [1, out]
  std::size_t kernel = 1;

  static Conv1d make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out,
                     std::size_t kernel, std::mt19937_64& rng);
  VarF operator()(const VarF& x, std::size_t steps, std::size_t batch, bool time_major) const;
};

struct GruLayer {
  VarF w_ih, b_ih, w_hh, b_hh;

  static GruLayer make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
                       std::mt19937_64& rng);
  std::size_t hidden() const { return w_hh.rows(); }
  // x: [steps*batch, in] time-major -> [steps*batch, hidden]
  VarF operator()(const VarF& x, std::size_t steps, std::size_t batch) const;
};

struct LstmLayer {
  VarF w_ih, b_ih, w_hh, b_hh;

  static LstmLayer make(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t hidden,
                        std::mt19937_64& rng);
  std::size_t hidden() const { return w_hh.rows(); }
  VarF operator()(const VarF& x, std::size_t steps, std::size_t batch) const;
};

// Inverted dropout: scales kept units by 1/(1-p). Identity when p == 0.
VarF dropout(const VarF& x, float p, std::mt19937_64& rng);

}  // namespace clonecraft::nn
