#include "clonecraft/audio/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include "clonecraft/core/error.hpp"

namespace clonecraft::audio {

struct Stft::Plans {
  double* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;

  explicit Plans(std::size_t n) {
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n / 2 + 1);
    r2c = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
    c2r = fftw_plan_dft_c2r_1d(static_cast<int>(n), out, in, FFTW_ESTIMATE);
  }
  ~Plans() {
    fftw_destroy_plan(r2c);
    fftw_destroy_plan(c2r);
    fftw_free(in);
    fftw_free(out);
  }
};

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long k = i % period;
  if (k < 0) k += period;
  if (k >= static_cast<long>(n)) k = period - k;
  return static_cast<std::size_t>(k);
}

Stft::Stft(std::size_t n_fft, std::size_t win_length, std::size_t hop)
    : n_fft_(n_fft), win_length_(win_length), hop_(hop), window_(n_fft, 0.0) {
  if (hop == 0 || win_length == 0 || win_length > n_fft) {
    throw Error(Errc::ConfigError, "stft: need 0 < win_length <= n_fft and hop > 0");
  }
  const std::size_t off = (n_fft - win_length) / 2;
  for (std::size_t i = 0; i < win_length; ++i) {
    window_[off + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / win_length);
  }
  plans_ = std::make_unique<Plans>(n_fft);
}

Stft::~Stft() = default;

std::vector<std::complex<double>> Stft::forward(const std::vector<float>& signal, std::size_t& frames) const {
  if (signal.empty()) throw Error(Errc::EmptyInput, "stft: empty signal");
  frames = num_frames(signal.size());
  const std::size_t bins = n_bins();
  std::vector<std::complex<double>> out(frames * bins);
  const long half = static_cast<long>(n_fft_ / 2);
  for (std::size_t t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t * hop_) - half;
    for (std::size_t i = 0; i < n_fft_; ++i) {
      plans_->in[i] = window_[i] == 0.0 ? 0.0 : window_[i] * signal[reflect_index(start + static_cast<long>(i), signal.size())];
    }
    fftw_execute(plans_->r2c);
    for (std::size_t k = 0; k < bins; ++k) out[t * bins + k] = {plans_->out[k][0], plans_->out[k][1]};
  }
  return out;
}

Matrix<double> Stft::power(const std::vector<float>& signal) const {
  std::size_t frames = 0;
  const auto spec = forward(signal, frames);
  Matrix<double> p(frames, n_bins());
  for (std::size_t i = 0; i < spec.size(); ++i) p[i] = std::norm(spec[i]);
  return p;
}

std::vector<float> Stft::inverse(const std::vector<std::complex<double>>& spec, std::size_t frames,
                                 std::size_t length) const {
  const std::size_t bins = n_bins();
  if (spec.size() != frames * bins) throw Error(Errc::ShapeError, "istft: spectrum size mismatch");
  const long half = static_cast<long>(n_fft_ / 2);
  const std::size_t padded = frames * hop_ + n_fft_;
  std::vector<double> acc(padded, 0.0), wsum(padded, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      plans_->out[k][0] = spec[t * bins + k].real();
      plans_->out[k][1] = spec[t * bins + k].imag();
    }
    fftw_execute(plans_->c2r);
    const std::size_t base = t * hop_;
    for (std::size_t i = 0; i < n_fft_; ++i) {
      const double y = plans_->in[i] / static_cast<double>(n_fft_);
      acc[base + i] += y * window_[i];
      wsum[base + i] += window_[i] * window_[i];
    }
  }
  std::vector<float> out(length, 0.0f);
  for (std::size_t n = 0; n < length; ++n) {
    const std::size_t p = n + static_cast<std::size_t>(half);
    if (p < padded && wsum[p] > 1e-8) out[n] = static_cast<float>(acc[p] / wsum[p]);
  }
  return out;
}

}  // namespace clonecraft::audio
