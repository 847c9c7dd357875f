#pragma once

#include <optional>

#include "clonecraft/core/error.hpp"

namespace clonecraft::testing {

// Code of the clonecraft::Error thrown by f, or nullopt if nothing was thrown.
template <class F>
std::optional<Errc> error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace clonecraft::testing
