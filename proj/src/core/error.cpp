#include "clonecraft/core/error.hpp"

namespace clonecraft {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::ConfigError: return "ConfigError";
    case Errc::TooShort: return "TooShort";
    case Errc::NumericalError: return "NumericalError";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::ShapeError: return "ShapeError";
    case Errc::FormatError: return "FormatError";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::ManifestError: return "ManifestError";
    case Errc::MissingAsset: return "MissingAsset";
    case Errc::SamplerError: return "SamplerError";
    case Errc::DependencyError: return "DependencyError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace clonecraft
