#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "../oracles/stats.hpp"
#include "clonecraft/audio/mel.hpp"
#include "clonecraft/audio/melf.hpp"
#include "clonecraft/audio/partials.hpp"
#include "clonecraft/audio/waveform.hpp"
#include "doctest.h"

using namespace clonecraft;
using namespace clonecraft::audio;

namespace {

Waveform tone(double hz, double seconds, int rate, float amp = 0.5f) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * static_cast<float>(std::sin(2.0 * std::numbers::pi * hz * i / rate));
  return w;
}

Waveform noise(std::size_t n, int rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-0.8f, 0.8f);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (auto& s : w.samples) s = d(rng);
  return w;
}

MelSpectrogram fake_mel(std::size_t frames, std::size_t n_mels = 40) {
  MelSpectrogram m;
  m.frames = MatrixF(frames, n_mels);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t c = 0; c < n_mels; ++c) m.frames(t, c) = static_cast<float>(t) + 0.001f * c;
  return m;
}

}  // namespace

TEST_CASE("mel presets carry the documented framing") {
  const auto enc = MelConfig::encoder();
  CHECK(enc.hop_samples() == 160);
  CHECK(enc.window_samples() == 400);
  CHECK(enc.n_mels == 40);
  const auto syn = MelConfig::synthesizer();
  CHECK(syn.hop_samples() == 275);
  CHECK(syn.window_samples() == 1102);
  CHECK(syn.n_mels == 80);
  CHECK(syn.fmax == doctest::Approx(11025.0));
}

TEST_CASE("1.6 s at 16 kHz gives 160 frames") {
  const auto mel = compute_mel(noise(25600, 16000, 1), MelConfig::encoder());
  CHECK(mel.num_frames() == 160);
  CHECK(mel.n_mels() == 40);
}

TEST_CASE("frame count follows ceil(len / hop) for random lengths") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 9000);
  for (int i = 0; i < 40; ++i) {
    const std::size_t n = len(rng);
    const auto mel = compute_mel(noise(n, 16000, i), MelConfig::encoder());
    CHECK(mel.num_frames() == (n + 159) / 160);
  }
}

TEST_CASE("silence maps to the log floor") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(8000, 0.0f);
  const auto mel = compute_mel(w, MelConfig::encoder());
  for (float v : mel.frames.storage()) CHECK(v == -12.0f);
}

TEST_CASE("440 Hz tone peaks in the channel whose centre is nearest in mel") {
  const auto cfg = MelConfig::encoder();
  const auto mel = compute_mel(tone(440.0, 1.0, 16000), cfg);
  std::vector<double> avg(mel.n_mels(), 0.0);
  for (std::size_t t = 0; t < mel.num_frames(); ++t)
    for (std::size_t c = 0; c < mel.n_mels(); ++c) avg[c] += mel.frames(t, c);
  const auto argmax = std::distance(avg.begin(), std::max_element(avg.begin(), avg.end()));

  // Independent oracle: equally spaced points on 2595*log10(1 + f/700).
  const double top = 2595.0 * std::log10(1.0 + 8000.0 / 700.0);
  const double target = 2595.0 * std::log10(1.0 + 440.0 / 700.0);
  int best = -1;
  double best_d = 1e9;
  for (int k = 0; k < 40; ++k) {
    const double centre = top * (k + 1) / 41.0;
    if (std::abs(centre - target) < best_d) {
      best_d = std::abs(centre - target);
      best = k;
    }
  }
  CHECK(best == 7);
  CHECK(argmax == best);
}

TEST_CASE("compute_mel error paths") {
  CHECK_THROWS_AS(compute_mel(Waveform{{}, 16000}, MelConfig::encoder()), Error);
  try {
    compute_mel(noise(100, 22050, 1), MelConfig::encoder());
    FAIL("expected ConfigMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigMismatch);
  }
  auto bad = MelConfig::encoder();
  bad.hop_ms = 30.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("mel is deterministic and monotone under attenuation") {
  const auto w = noise(4000, 16000, 3);
  const auto a = compute_mel(w, MelConfig::encoder());
  const auto b = compute_mel(w, MelConfig::encoder());
  CHECK(a.frames == b.frames);
  for (float alpha : {1.0f, 0.9f, 0.5f, 0.1f, 0.013f}) {
    Waveform s = w;
    for (auto& x : s.samples) x *= alpha;
    const auto m = compute_mel(s, MelConfig::encoder());
    bool ok = true;
    for (std::size_t i = 0; i < m.frames.size(); ++i) ok = ok && m.frames[i] <= a.frames[i];
    CHECK(ok);
  }
}

TEST_CASE("slice_partials window starts") {
  CHECK(partial_starts(160) == std::vector<std::size_t>{0});
  CHECK(partial_starts(240) == std::vector<std::size_t>{0, 80});
  CHECK(partial_starts(400) == std::vector<std::size_t>{0, 80, 160, 240});
  CHECK(partial_starts(250) == std::vector<std::size_t>{0, 80, 90});

  const auto padded = slice_partials(fake_mel(100), 160, 0.5, ShortInput::Padded);
  REQUIRE(padded.size() == 1);
  CHECK(padded[0].frames.rows() == 160);
  CHECK(padded[0].frames(130, 0) == 30.0f);  // cyclic: frame 130 -> 30

  try {
    slice_partials(fake_mel(159), 160, 0.5, ShortInput::Strict);
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooShort);
  }
}

TEST_CASE("slice_partials covers every frame within bounds") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> d(160, 2000);
  for (int i = 0; i < 200; ++i) {
    const std::size_t T = d(rng);
    std::vector<int> covered(T, 0);
    for (std::size_t s : partial_starts(T)) {
      REQUIRE(s + 160 <= T);
      for (std::size_t t = s; t < s + 160; ++t) covered[t] = 1;
    }
    CHECK(std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; }));
  }
}

TEST_CASE("training crops are reproducible and uniform") {
  std::mt19937_64 r1(9);
  CHECK(sample_training_crop(fake_mel(160), r1).start_frame == 0);
  std::mt19937_64 a(42), b(42);
  const auto mel = fake_mel(320);
  for (int i = 0; i < 5; ++i) CHECK(sample_training_crop(mel, a).start_frame == sample_training_crop(mel, b).start_frame);

  std::mt19937_64 rng(2024);
  std::vector<long> counts(161, 0);
  for (int i = 0; i < 10000; ++i) ++counts[sample_training_crop(mel, rng).start_frame];
  CHECK(clonecraft::testing::chi_square_uniform_p(counts) > 0.01);

  CHECK_THROWS_AS(sample_training_crop(fake_mel(100), rng), Error);
}

TEST_CASE("MELF round trip and header") {
  MelSpectrogram m = compute_mel(tone(300.0, 0.5, 22050), MelConfig::synthesizer());
  std::stringstream ss;
  write_melf(ss, m);
  const std::string bytes = ss.str();
  CHECK(bytes.substr(0, 4) == "MELF");
  CHECK(bytes.size() == 16 + m.frames.size() * 4);
  std::stringstream in(bytes);
  const auto back = read_melf(in);
  CHECK(back.frames == m.frames);
  CHECK(back.n_mels() == 80);
  CHECK(back.config.hop_ms == doctest::Approx(12.5));
  CHECK(back.config == MelConfig::synthesizer());

  std::string bad = bytes;
  bad[0] = 'X';
  std::stringstream bs(bad);
  try {
    read_melf(bs);
    FAIL("expected FormatError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::FormatError);
  }
  std::stringstream trunc(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_melf(trunc), Error);
}

TEST_CASE("WAV round trip and peak normalisation") {
  const auto dir = std::filesystem::temp_directory_path() / "clonecraft_wav_test";
  const auto w = tone(200.0, 0.25, 16000, 0.3f);
  write_wav(dir / "t.wav", w);
  const auto r = read_wav(dir / "t.wav");
  CHECK(r.sample_rate == 16000);
  REQUIRE(r.size() == w.size());
  for (std::size_t i = 0; i < r.size(); i += 97) CHECK(r.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-3));
  const auto n = normalize_peak(r);
  float mx = 0;
  for (float s : n.samples) mx = std::max(mx, std::abs(s));
  CHECK(mx == doctest::Approx(0.95f));
  try {
    read_wav(dir / "missing.wav");
    FAIL("expected MissingAsset");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingAsset);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("resampling preserves tone frequency and level") {
  const auto w = tone(440.0, 1.0, 22050, 0.5f);
  const auto r = resample(w, 16000);
  CHECK(r.sample_rate == 16000);
  CHECK(r.size() == 16000);
  // compare against the analytic tone away from the edges
  double err = 0.0;
  for (std::size_t i = 200; i < 15800; ++i)
    err = std::max(err, std::abs(r.samples[i] - 0.5 * std::sin(2.0 * std::numbers::pi * 440.0 * i / 16000.0)));
  CHECK(err < 5e-3);
}
