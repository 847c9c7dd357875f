#include "clonecraft/ge2e/ge2e.hpp"

#include <algorithm>

namespace clonecraft::ge2e {

Ge2eParams::Ge2eParams(float w, float b) {
  w_ = params_.add("ge2e.w", MatrixF(1, 1, w));
  b_ = params_.add("ge2e.b", MatrixF(1, 1, b));
  clamp();
}

void Ge2eParams::clamp() {
  float& w = w_.mutable_value()[0];
  w = std::max(w, kMinW);
}

}  // namespace clonecraft::ge2e
