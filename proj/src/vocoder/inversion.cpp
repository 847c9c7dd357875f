#include "clonecraft/vocoder/inversion.hpp"

#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Dense>

#include "clonecraft/audio/melf.hpp"
#include "clonecraft/audio/stft.hpp"
#include "clonecraft/simd/kernels.hpp"

namespace clonecraft::vocoder {

namespace {

// Multiplicative non-negative least-squares updates P <- P * (M fb^T) / (P fb fb^T)
// starting from the clamped pseudo-inverse. Zero bins stay zero, so the
// start is lifted slightly inside the filterbank's support.
void refine_nonnegative(const audio::MelSpectrogram& mel, const audio::MelConfig& mc, double ref,
                        std::size_t iterations, std::vector<double>& power, std::size_t bins) {
  if (iterations == 0) return;
  const MatrixF fbf = audio::mel_filterbank(mc);
  const std::size_t T = mel.num_frames(), M = mel.n_mels();
  std::vector<double> fb(fbf.storage().begin(), fbf.storage().end());  // [bins, M]
  std::vector<double> target(T * M), q(M), num(bins), den(bins);
  for (std::size_t i = 0; i < T * M; ++i) {
    const float lv = mel.frames.storage()[i];
    target[i] = lv <= mc.log_floor ? 0.0 : std::exp(static_cast<double>(lv)) * ref;
  }
  const auto& K = simd::kernels<double>();
  for (std::size_t t = 0; t < T; ++t) {
    double* p = power.data() + t * bins;
    const double* m = target.data() + t * M;
    double peak = 0;
    for (std::size_t k = 0; k < bins; ++k) peak = std::max(peak, p[k]);
    if (peak <= 0) continue;
    std::fill(num.begin(), num.end(), 0.0);
    K.gemm_nt(1, bins, M, m, fb.data(), num.data());
    for (std::size_t k = 0; k < bins; ++k)
      if (num[k] > 0) p[k] = std::max(p[k], 1e-6 * peak);
    for (std::size_t it = 0; it < iterations; ++it) {
      std::fill(q.begin(), q.end(), 0.0);
      K.gemm_nn(1, M, bins, p, fb.data(), q.data());
      std::fill(den.begin(), den.end(), 0.0);
      K.gemm_nt(1, bins, M, q.data(), fb.data(), den.data());
      for (std::size_t k = 0; k < bins; ++k) p[k] = den[k] > 0 ? p[k] * num[k] / den[k] : 0.0;
    }
  }
}

}  // namespace

InversionConfig InversionConfig::for_mel(const audio::MelConfig& mel) {
  mel.validate();
  InversionConfig c;
  c.mel = mel;
  const MatrixF fb = audio::mel_filterbank(mel);  // [bins, mels]
  Eigen::MatrixXd m(fb.rows(), fb.cols());
  for (std::size_t i = 0; i < fb.rows(); ++i)
    for (std::size_t j = 0; j < fb.cols(); ++j) m(i, j) = fb(i, j);
  const Eigen::MatrixXd pinv = m.completeOrthogonalDecomposition().pseudoInverse();
  c.mel_pseudo_inverse = MatrixF(pinv.rows(), pinv.cols());
  for (Eigen::Index i = 0; i < pinv.rows(); ++i)
    for (Eigen::Index j = 0; j < pinv.cols(); ++j) c.mel_pseudo_inverse(i, j) = static_cast<float>(pinv(i, j));
  return c;
}

void InversionConfig::validate() const {
  if (n_iterations < 1) throw Error(Errc::ConfigError, "n_iterations must be >= 1");
  if (!(power > 0.0f)) throw Error(Errc::ConfigError, "power must be positive");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw Error(Errc::ConfigError, "momentum must be in [0, 1)");
  if (!(peak > 0.0f && peak <= 1.0f)) throw Error(Errc::ConfigError, "peak must be in (0, 1]");
  if (mel_pseudo_inverse.rows() != static_cast<std::size_t>(mel.n_mels) ||
      mel_pseudo_inverse.cols() != mel.n_fft() / 2 + 1)
    throw Error(Errc::ConfigError, "pseudo-inverse shape does not match the mel config");
}

audio::Waveform invert_mel(const audio::MelSpectrogram& mel, const InversionConfig& config) {
  config.validate();
  const auto& mc = config.mel;
  if (mel.n_mels() != static_cast<std::size_t>(mc.n_mels) ||
      (mel.config.sample_rate != 0 && mel.config.sample_rate != mc.sample_rate))
    throw Error(Errc::ConfigMismatch, "invert_mel: mel does not match the inversion config");
  for (float v : mel.frames.storage())
    if (!std::isfinite(v)) throw Error(Errc::NumericalError, "invert_mel: non-finite mel entry");

  const std::size_t T = mel.num_frames(), M = mel.n_mels();
  const std::size_t bins = config.mel_pseudo_inverse.cols();
  audio::Waveform out;
  out.sample_rate = mc.sample_rate;
  if (T == 0) return out;

  const double ref = audio::power_reference(mc);
  std::vector<double> mag(T * bins, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < M; ++j) {
      const float lv = mel.frames(t, j);
      if (lv <= mc.log_floor) continue;
      const double p = std::exp(static_cast<double>(lv)) * ref;
      const float* row = config.mel_pseudo_inverse.data() + j * bins;
      for (std::size_t k = 0; k < bins; ++k) mag[t * bins + k] += p * row[k];
    }
    for (std::size_t k = 0; k < bins; ++k) mag[t * bins + k] = std::max(mag[t * bins + k], 0.0);
  }
  refine_nonnegative(mel, mc, ref, config.nnls_iterations, mag, bins);
  for (double& v : mag) v = std::pow(std::sqrt(v), static_cast<double>(config.power));

  audio::Stft stft(mc.n_fft(), mc.window_samples(), mc.hop_samples());
  const std::size_t length = T * mc.hop_samples();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
  std::vector<std::complex<double>> angles(T * bins), tprev(T * bins), spec(T * bins);
  for (auto& a : angles) a = std::polar(1.0, phase(rng));

  const double alpha = config.momentum / (1.0 + config.momentum);
  std::vector<float> signal;
  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = mag[i] * angles[i];
    signal = stft.inverse(spec, T, length);
    std::size_t frames = 0;
    auto rebuilt = stft.forward(signal, frames);
    for (std::size_t i = 0; i < angles.size(); ++i) {
      const std::complex<double> a = rebuilt[i] - alpha * tprev[i];
      const double n = std::abs(a);
      angles[i] = n > 1e-16 ? a / n : std::complex<double>(1.0, 0.0);
      tprev[i] = rebuilt[i];
    }
  }
  for (std::size_t i = 0; i < spec.size(); ++i) spec[i] = mag[i] * angles[i];
  out.samples = stft.inverse(spec, T, length);
  return audio::normalize_peak(std::move(out), config.peak);
}

void export_mel(const audio::MelSpectrogram& mel, const std::filesystem::path& path) {
  audio::write_melf(path, mel);
}

audio::MelSpectrogram import_mel(const std::filesystem::path& path) { return audio::read_melf(path); }

}  // namespace clonecraft::vocoder
