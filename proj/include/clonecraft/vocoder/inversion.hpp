#pragma once

#include <cstdint>
#include <filesystem>

#include "clonecraft/audio/mel.hpp"
#include "clonecraft/audio/waveform.hpp"

namespace clonecraft::vocoder {

struct InversionConfig {
  std::size_t n_iterations = 32;
  std::size_t nnls_iterations = 50;  // non-negative refinement of the pseudo-inverse estimate
  float power = 1.0f;      // exponent applied to the recovered magnitude
  float momentum = 0.99f;  // 0 gives plain Griffin-Lim
  float peak = 0.95f;
  std::uint64_t seed = 0;  // initial phase
  audio::MelConfig mel = audio::MelConfig::synthesizer();
  MatrixF mel_pseudo_inverse;  // [n_mels, n_fft/2 + 1]

  static InversionConfig for_mel(const audio::MelConfig& mel);
  void validate() const;
};

// Mel -> linear power via the filterbank pseudo-inverse (negatives clamped,
// floor entries treated as silence) refined by non-negative least squares,
// then iterative phase reconstruction with momentum.
// Output has T * hop samples and is peak-normalised. NumericalError on
// non-finite input; ConfigMismatch if the mel config differs.
audio::Waveform invert_mel(const audio::MelSpectrogram& mel, const InversionConfig& config);

// MELF handoff for external vocoders.
void export_mel(const audio::MelSpectrogram& mel, const std::filesystem::path& path);
audio::MelSpectrogram import_mel(const std::filesystem::path& path);

}  // namespace clonecraft::vocoder
