#pragma once

#include <filesystem>
#include <vector>

namespace clonecraft::audio {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const { return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0; }
};

inline constexpr int kEncoderSampleRate = 16000;
inline constexpr int kSynthSampleRate = 22050;

// Reads a PCM WAV (16-bit integer or 32-bit float). Multi-channel input is
// averaged to mono. Missing file -> MissingAsset; malformed -> FormatError.
Waveform read_wav(const std::filesystem::path& path);

// Writes 16-bit mono PCM. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

// Scales so that max |sample| == peak. Silent input is returned unchanged.
Waveform normalize_peak(Waveform wave, float peak = 0.95f);

// Band-limited resampling with a Hann-windowed sinc kernel.
Waveform resample(const Waveform& wave, int target_rate);

// read_wav -> resample to target_rate -> normalize_peak(0.95)
Waveform load_for_analysis(const std::filesystem::path& path, int target_rate);

float rms(const Waveform& wave);

}  // namespace clonecraft::audio
