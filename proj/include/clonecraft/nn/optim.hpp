#pragma once

#include <map>
#include <string>
#include <vector>

#include "clonecraft/nn/params.hpp"

namespace clonecraft::nn {

struct AdamOptions {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// Adam over a set of parameter groups. Each group may carry its own learning
// rate multiplier.
class Adam {
 public:
  struct Group {
    ParameterSet* params = nullptr;
    float lr_scale = 1.0f;
  };

  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  void add_group(ParameterSet& params, float lr_scale = 1.0f);
  void step(float lr);
  long steps_taken() const { return t_; }

  // Moment buffers keyed by "<group index>/<param name>/{m,v}".
  std::map<std::string, MatrixF> state() const;
  void load_state(const std::map<std::string, MatrixF>& state, long steps);

 private:
  AdamOptions opts_;
  std::vector<Group> groups_;
  std::vector<std::vector<MatrixF>> m_, v_;
  long t_ = 0;
};

// Scales every gradient so the global L2 norm is at most max_norm.
// Returns the norm before clipping.
float clip_grad_norm(const std::vector<ParameterSet*>& sets, float max_norm);
float grad_norm(const std::vector<ParameterSet*>& sets);

}  // namespace clonecraft::nn
