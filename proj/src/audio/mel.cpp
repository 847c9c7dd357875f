#include "clonecraft/audio/mel.hpp"

#include <algorithm>
#include <cmath>

#include "clonecraft/audio/stft.hpp"
#include "clonecraft/core/error.hpp"
#include "clonecraft/simd/kernels.hpp"

namespace clonecraft::audio {

MelConfig MelConfig::encoder() { return MelConfig{}; }

MelConfig MelConfig::synthesizer() {
  MelConfig c;
  c.sample_rate = kSynthSampleRate;
  c.window_ms = 50.0;
  c.hop_ms = 12.5;
  c.n_mels = 80;
  c.fmin = 0.0;
  c.fmax = kSynthSampleRate / 2.0;
  return c;
}

std::size_t MelConfig::hop_samples() const {
  return static_cast<std::size_t>(std::floor(sample_rate * hop_ms / 1000.0 + 1e-9));
}

std::size_t MelConfig::window_samples() const {
  return static_cast<std::size_t>(std::floor(sample_rate * window_ms / 1000.0 + 1e-9));
}

std::size_t MelConfig::n_fft() const { return next_pow2(window_samples()); }

void MelConfig::validate() const {
  if (sample_rate <= 0) throw Error(Errc::ConfigError, "mel: sample_rate must be positive");
  if (!(hop_ms > 0.0) || !(hop_ms < window_ms)) throw Error(Errc::ConfigError, "mel: need 0 < hop_ms < window_ms");
  if (n_mels < 1) throw Error(Errc::ConfigError, "mel: n_mels must be >= 1");
  if (!(fmin >= 0.0) || !(fmin < fmax) || fmax > sample_rate / 2.0 + 1e-9) {
    throw Error(Errc::ConfigError, "mel: need 0 <= fmin < fmax <= sample_rate/2");
  }
  if (hop_samples() == 0) throw Error(Errc::ConfigError, "mel: hop shorter than one sample");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {
std::vector<double> mel_edges(const MelConfig& c) {
  const double lo = hz_to_mel(c.fmin), hi = hz_to_mel(c.fmax);
  std::vector<double> edges(static_cast<std::size_t>(c.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / (c.n_mels + 1));
  }
  return edges;
}
}  // namespace

std::vector<double> mel_centers(const MelConfig& config) {
  auto e = mel_edges(config);
  return {e.begin() + 1, e.end() - 1};
}

MatrixF mel_filterbank(const MelConfig& config) {
  config.validate();
  const std::size_t n_fft = config.n_fft();
  const std::size_t bins = n_fft / 2 + 1;
  const auto edges = mel_edges(config);
  MatrixF fb(bins, static_cast<std::size_t>(config.n_mels));
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * config.sample_rate / n_fft;
    for (int m = 0; m < config.n_mels; ++m) {
      const double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
      const double up = (f - lo) / (c - lo);
      const double down = (hi - f) / (hi - c);
      fb(k, m) = static_cast<float>(std::max(0.0, std::min(up, down)));
    }
  }
  return fb;
}

double power_reference(const MelConfig& config) {
  Stft stft(config.n_fft(), config.window_samples(), config.hop_samples());
  double s = 0.0;
  for (double w : stft.window()) s += w;
  return (s / 2.0) * (s / 2.0);
}

MelSpectrogram compute_mel(const Waveform& wave, const MelConfig& config) {
  if (wave.empty()) throw Error(Errc::EmptyInput, "compute_mel: empty waveform");
  if (wave.sample_rate != config.sample_rate) {
    throw Error(Errc::ConfigMismatch, "compute_mel: waveform rate " + std::to_string(wave.sample_rate) +
                                          " != config rate " + std::to_string(config.sample_rate));
  }
  config.validate();
  for (float s : wave.samples)
    if (!std::isfinite(s)) throw Error(Errc::NumericalError, "compute_mel: non-finite sample");

  Stft stft(config.n_fft(), config.window_samples(), config.hop_samples());
  const Matrix<double> pw = stft.power(wave.samples);
  const double ref = power_reference(config);
  MatrixF p(pw.rows(), pw.cols());
  for (std::size_t i = 0; i < pw.size(); ++i) p[i] = static_cast<float>(pw[i] / ref);

  const MatrixF fb = mel_filterbank(config);
  MelSpectrogram out;
  out.config = config;
  out.frames = MatrixF(p.rows(), fb.cols());
  simd::kernels<float>().gemm_nn(p.rows(), fb.cols(), p.cols(), p.data(), fb.data(), out.frames.data());
  for (float& v : out.frames.storage()) {
    v = v > 0.0f ? std::max(std::log(v), config.log_floor) : config.log_floor;
  }
  return out;
}

}  // namespace clonecraft::audio
