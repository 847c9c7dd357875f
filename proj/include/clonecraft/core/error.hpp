#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clonecraft {

enum class Errc {
  EmptyInput,
  ConfigMismatch,
  ConfigError,
  TooShort,
  NumericalError,
  BatchTooSmall,
  ShapeError,
  FormatError,
  ProtocolError,
  ManifestError,
  MissingAsset,
  SamplerError,
  DependencyError,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

// All library failures surface as this exception; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace clonecraft
