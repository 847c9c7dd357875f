#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "clonecraft/core/matrix.hpp"

namespace clonecraft::audio {

// Centre-padded short-time Fourier transform. Frame t is centred on sample
// t*hop; the signal is reflect-padded at both ends. For a signal of length L
// the transform has ceil(L / hop) frames. The analysis window is a periodic
// Hann of `win_length` samples centred inside an `n_fft` frame.
class Stft {
 public:
  Stft(std::size_t n_fft, std::size_t win_length, std::size_t hop);
  ~Stft();
  Stft(const Stft&) = delete;
  Stft& operator=(const Stft&) = delete;

  std::size_t n_fft() const { return n_fft_; }
  std::size_t hop() const { return hop_; }
  std::size_t n_bins() const { return n_fft_ / 2 + 1; }
  std::size_t num_frames(std::size_t signal_length) const { return (signal_length + hop_ - 1) / hop_; }
  const std::vector<double>& window() const { return window_; }

  // [frames, n_bins] complex spectrum, row-major.
  std::vector<std::complex<double>> forward(const std::vector<float>& signal, std::size_t& frames) const;
  // [frames, n_bins] power |X|^2.
  Matrix<double> power(const std::vector<float>& signal) const;
  // Weighted overlap-add inverse. Returns `length` samples aligned with the
  // forward transform's centring.
  std::vector<float> inverse(const std::vector<std::complex<double>>& spec, std::size_t frames,
                             std::size_t length) const;

 private:
  struct Plans;
  std::size_t n_fft_, win_length_, hop_;
  std::vector<double> window_;  // n_fft long, zero outside the centred Hann
  std::unique_ptr<Plans> plans_;
};

// Index into [0, n) under repeated mirror reflection about the end samples.
std::size_t reflect_index(long i, std::size_t n);

std::size_t next_pow2(std::size_t n);

}  // namespace clonecraft::audio
