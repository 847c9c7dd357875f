#include <cmath>
#include <filesystem>
#include <fstream>

#include "../oracles/signal.hpp"
#include "clonecraft/audio/melf.hpp"
#include "clonecraft/vocoder/inversion.hpp"
#include "doctest.h"
#include "expect.hpp"

using namespace clonecraft;
using namespace clonecraft::vocoder;
using clonecraft::testing::error_code;

namespace {

audio::MelSpectrogram tone_mel(double hz, double seconds) {
  audio::Waveform w{clonecraft::testing::sine(hz, seconds, audio::kSynthSampleRate), audio::kSynthSampleRate};
  return audio::compute_mel(w, audio::MelConfig::synthesizer());
}

const InversionConfig& synth_inversion() {
  static const InversionConfig c = InversionConfig::for_mel(audio::MelConfig::synthesizer());
  return c;
}

}  // namespace

TEST_CASE("pseudo-inverse satisfies the Moore-Penrose identity fb * pinv * fb = fb") {
  const auto cfg = audio::MelConfig::synthesizer();
  const MatrixF fb = audio::mel_filterbank(cfg);
  const MatrixF& pinv = synth_inversion().mel_pseudo_inverse;
  REQUIRE(pinv.rows() == fb.cols());
  REQUIRE(pinv.cols() == fb.rows());
  // G = pinv * fb is [mels, mels]; fb * G must reproduce fb.
  const std::size_t M = fb.cols(), K = fb.rows();
  std::vector<double> g(M * M, 0.0);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < M; ++j) g[i * M + j] += static_cast<double>(pinv(i, k)) * fb(k, j);
  double err = 0;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < M; ++j) {
      double v = 0;
      for (std::size_t i = 0; i < M; ++i) v += fb(k, i) * g[i * M + j];
      err = std::max(err, std::fabs(v - fb(k, j)));
    }
  CHECK(err < 1e-4);
}

TEST_CASE("silence inverts to near-silence") {
  audio::MelSpectrogram mel;
  mel.config = audio::MelConfig::synthesizer();
  mel.frames = MatrixF(40, 80, mel.config.log_floor);
  const auto w = invert_mel(mel, synth_inversion());
  CHECK(w.sample_rate == audio::kSynthSampleRate);
  CHECK(audio::rms(w) < 1e-3f);
}

TEST_CASE("output length follows T * hop") {
  audio::MelSpectrogram mel;
  mel.config = audio::MelConfig::synthesizer();
  mel.frames = MatrixF(200, 80, -5.0f);
  auto cfg = synth_inversion();
  cfg.n_iterations = 2;
  const auto w = invert_mel(mel, cfg);
  const long expect = 200 * 275;
  CHECK(std::labs(static_cast<long>(w.size()) - expect) <= static_cast<long>(mel.config.window_samples()));
  float peak = 0;
  for (float v : w.samples) peak = std::max(peak, std::fabs(v));
  CHECK(peak == doctest::Approx(0.95f).epsilon(1e-4));
}

TEST_CASE("a 440 Hz tone survives the mel round trip") {
  const auto mel = tone_mel(440.0, 1.0);
  const auto w = invert_mel(mel, synth_inversion());
  const std::size_t n = audio::MelConfig::synthesizer().n_fft();
  const double bin_hz = static_cast<double>(audio::kSynthSampleRate) / static_cast<double>(n);
  const auto p = clonecraft::testing::dft_power(w.samples, w.size() / 2 - n / 2, n);
  const double peak_hz = clonecraft::testing::argmax(p) * bin_hz;
  CHECK(std::fabs(peak_hz - 440.0) <= bin_hz);
}

TEST_CASE("re-analysed inversion correlates with the input mel") {
  for (double hz : {220.0, 440.0, 1000.0}) {
    const auto mel = tone_mel(hz, 0.8);
    const auto w = invert_mel(mel, synth_inversion());
    const auto back = audio::compute_mel(w, audio::MelConfig::synthesizer());
    REQUIRE(back.frames.size() == mel.frames.size());
    std::vector<double> a(mel.frames.storage().begin(), mel.frames.storage().end());
    std::vector<double> b(back.frames.storage().begin(), back.frames.storage().end());
    CHECK(clonecraft::testing::pearson(a, b) > 0.8);
  }
}

TEST_CASE("inversion is seeded and validates its input") {
  const auto mel = tone_mel(300.0, 0.3);
  auto cfg = synth_inversion();
  cfg.n_iterations = 4;
  CHECK(invert_mel(mel, cfg).samples == invert_mel(mel, cfg).samples);

  auto bad = mel;
  bad.frames(2, 3) = std::nanf("");
  CHECK(error_code([&] { invert_mel(bad, cfg); }) == Errc::NumericalError);
  audio::Waveform w16{clonecraft::testing::sine(300.0, 0.3, 16000), 16000};
  const auto enc = audio::compute_mel(w16, audio::MelConfig::encoder());
  CHECK(error_code([&] { invert_mel(enc, cfg); }) == Errc::ConfigMismatch);
  cfg.n_iterations = 0;
  CHECK(error_code([&] { invert_mel(mel, cfg); }) == Errc::ConfigError);
}

TEST_CASE("exported mels round trip bit-exactly and reject corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "clonecraft_vocoder_test";
  std::filesystem::create_directories(dir);
  const auto mel = tone_mel(440.0, 0.25);
  export_mel(mel, dir / "a.melf");
  const auto back = import_mel(dir / "a.melf");
  CHECK(back.frames == mel.frames);
  CHECK(back.n_mels() == 80);
  CHECK(back.config.hop_ms == 12.5);
  {
    std::fstream f(dir / "a.melf", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("MELX", 4);
  }
  CHECK(error_code([&] { import_mel(dir / "a.melf"); }) == Errc::FormatError);
  std::filesystem::remove_all(dir);
}
