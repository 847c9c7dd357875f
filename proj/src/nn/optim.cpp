#include "clonecraft/nn/optim.hpp"

#include <cmath>

namespace clonecraft::nn {

void Adam::add_group(ParameterSet& params, float lr_scale) {
  groups_.push_back({&params, lr_scale});
  std::vector<MatrixF> m, v;
  for (const auto& e : params.entries()) {
    m.emplace_back(e.var.rows(), e.var.cols());
    v.emplace_back(e.var.rows(), e.var.cols());
  }
  m_.push_back(std::move(m));
  v_.push_back(std::move(v));
}

void Adam::step(float lr) {
  ++t_;
  const float bc1 = 1.0f - std::pow(opts_.beta1, static_cast<float>(t_));
  const float bc2 = 1.0f - std::pow(opts_.beta2, static_cast<float>(t_));
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const float glr = lr * groups_[gi].lr_scale;
    auto& entries = groups_[gi].params->entries();
    for (std::size_t pi = 0; pi < entries.size(); ++pi) {
      VarF& p = entries[pi].var;
      if (!p.node()->has_grad()) continue;
      MatrixF& w = p.mutable_value();
      const MatrixF& g = p.grad();
      MatrixF& m = m_[gi][pi];
      MatrixF& v = v_[gi][pi];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = opts_.beta1 * m[i] + (1.0f - opts_.beta1) * g[i];
        v[i] = opts_.beta2 * v[i] + (1.0f - opts_.beta2) * g[i] * g[i];
        const float mh = m[i] / bc1;
        const float vh = v[i] / bc2;
        w[i] -= glr * mh / (std::sqrt(vh) + opts_.eps);
      }
    }
  }
}

std::map<std::string, MatrixF> Adam::state() const {
  std::map<std::string, MatrixF> out;
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const auto& entries = groups_[gi].params->entries();
    for (std::size_t pi = 0; pi < entries.size(); ++pi) {
      const std::string key = std::to_string(gi) + "/" + entries[pi].name;
      out[key + "/m"] = m_[gi][pi];
      out[key + "/v"] = v_[gi][pi];
    }
  }
  return out;
}

void Adam::load_state(const std::map<std::string, MatrixF>& state, long steps) {
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const auto& entries = groups_[gi].params->entries();
    for (std::size_t pi = 0; pi < entries.size(); ++pi) {
      const std::string key = std::to_string(gi) + "/" + entries[pi].name;
      auto mi = state.find(key + "/m");
      auto vi = state.find(key + "/v");
      if (mi == state.end() || vi == state.end() || !mi->second.same_shape(m_[gi][pi]) ||
          !vi->second.same_shape(v_[gi][pi])) {
        throw Error(Errc::FormatError, "optimizer state missing or mis-shaped for " + key);
      }
      m_[gi][pi] = mi->second;
      v_[gi][pi] = vi->second;
    }
  }
  t_ = steps;
}

float grad_norm(const std::vector<ParameterSet*>& sets) {
  double acc = 0.0;
  for (const ParameterSet* ps : sets)
    for (const auto& e : ps->entries())
      if (e.var.node()->has_grad())
        for (float g : e.var.grad().storage()) acc += static_cast<double>(g) * g;
  return static_cast<float>(std::sqrt(acc));
}

float clip_grad_norm(const std::vector<ParameterSet*>& sets, float max_norm) {
  const float norm = grad_norm(sets);
  if (norm > max_norm && norm > 0.0f) {
    const float s = max_norm / norm;
    for (ParameterSet* ps : sets)
      for (auto& e : ps->entries())
        if (e.var.node()->has_grad())
          for (float& g : e.var.grad_buffer().storage()) g *= s;
  }
  return norm;
}

}  // namespace clonecraft::nn
