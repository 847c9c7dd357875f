#pragma once

#include <string>

#include "clonecraft/audio/waveform.hpp"
#include "clonecraft/core/matrix.hpp"

namespace clonecraft::audio {

struct MelConfig {
  int sample_rate = kEncoderSampleRate;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 40;
  double fmin = 0.0;
  double fmax = 8000.0;
  float log_floor = -12.0f;

  // 16 kHz, 25 ms window, 10 ms hop, 40 channels.
  static MelConfig encoder();
  // 22.05 kHz, 50 ms window, 12.5 ms hop, 80 channels.
  static MelConfig synthesizer();

  std::size_t hop_samples() const;
  std::size_t window_samples() const;
  std::size_t n_fft() const;
  void validate() const;

  friend bool operator==(const MelConfig&, const MelConfig&) = default;
};

// Log-mel energies, one row per frame.
struct MelSpectrogram {
  MatrixF frames;  // [T, n_mels]
  MelConfig config;

  std::size_t num_frames() const { return frames.rows(); }
  std::size_t n_mels() const { return frames.cols(); }
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Centre frequencies (Hz) of the n_mels triangular filters.
std::vector<double> mel_centers(const MelConfig& config);

// [n_fft/2 + 1, n_mels] triangular filters with unit peak on the HTK mel scale.
MatrixF mel_filterbank(const MelConfig& config);

// Power reference for log compression: a full-scale sinusoid on a bin centre
// maps to roughly 0.
double power_reference(const MelConfig& config);

// Reflect-padded centred framing, T = ceil(len / hop); log(mel power / ref)
// clamped below at log_floor. EmptyInput on empty input, ConfigMismatch when
// the waveform rate differs from the config.
MelSpectrogram compute_mel(const Waveform& wave, const MelConfig& config);

}  // namespace clonecraft::audio
