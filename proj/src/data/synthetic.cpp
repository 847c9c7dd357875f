#include "clonecraft/data/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include "clonecraft/core/error.hpp"

namespace clonecraft::data {
namespace {

constexpr double kPi = std::numbers::pi;

constexpr std::array<const char*, 48> kWords = {
    "the",   "quick", "brown", "fox",   "jumps", "over",  "lazy",  "dog",   "a",     "bold",  "voice", "sings",
    "under", "blue",  "moon",  "light", "near",  "old",   "river", "bank",  "we",    "hear",  "soft",  "wind",
    "in",    "tall",  "green", "trees", "each",  "day",   "ends",  "with",  "warm",  "rain",  "and",   "calm",
    "sea",   "waves", "clear", "sky",   "bright", "stars", "shine", "on",    "quiet", "hills", "far",   "away"};

enum class Seg { Vowel, Voiced, Unvoiced, Pause };

struct Phone {
  Seg kind;
  double f1, f2, f3;  // formants (Hz) for voiced segments; f1 is the noise band centre when unvoiced
  double dur_ms;
};

Phone phone_for(char c) {
  switch (c) {
    case 'a': return {Seg::Vowel, 730, 1090, 2440, 110};
    case 'e': return {Seg::Vowel, 530, 1840, 2480, 100};
    case 'i': return {Seg::Vowel, 270, 2290, 3010, 95};
    case 'o': return {Seg::Vowel, 570, 840, 2410, 110};
    case 'u': return {Seg::Vowel, 300, 870, 2240, 100};
    case 'y': return {Seg::Vowel, 390, 1990, 2550, 90};
    case 'm': return {Seg::Voiced, 280, 1000, 2200, 70};
    case 'n': return {Seg::Voiced, 280, 1600, 2600, 70};
    case 'l': return {Seg::Voiced, 360, 1300, 2800, 65};
    case 'r': return {Seg::Voiced, 420, 1300, 1600, 65};
    case 'w': return {Seg::Voiced, 300, 700, 2200, 60};
    case 'b': return {Seg::Voiced, 250, 900, 2100, 55};
    case 'd': return {Seg::Voiced, 250, 1700, 2600, 55};
    case 'g': return {Seg::Voiced, 250, 1500, 2000, 55};
    case 'v': return {Seg::Voiced, 300, 1200, 2300, 60};
    case 'z': return {Seg::Voiced, 300, 1600, 2600, 65};
    case 'j': return {Seg::Voiced, 280, 2100, 2800, 60};
    case 's': return {Seg::Unvoiced, 5500, 0, 0, 80};
    case 'f': return {Seg::Unvoiced, 3500, 0, 0, 75};
    case 'h': return {Seg::Unvoiced, 1500, 0, 0, 60};
    case 'k': return {Seg::Unvoiced, 2500, 0, 0, 55};
    case 'p': return {Seg::Unvoiced, 1200, 0, 0, 55};
    case 't': return {Seg::Unvoiced, 4000, 0, 0, 55};
    case 'c': return {Seg::Unvoiced, 2800, 0, 0, 55};
    case 'q': return {Seg::Unvoiced, 2200, 0, 0, 55};
    case 'x': return {Seg::Unvoiced, 4500, 0, 0, 70};
    default: return {Seg::Pause, 0, 0, 0, 45};
  }
}

double nominal_duration_s(const std::string& text) {
  double ms = 0;
  for (char c : text) ms += phone_for(c).dur_ms;
  return ms / 1000.0 + 0.1;  // leading and trailing pauses
}

// Per-sample parameter track, interpolated between segment targets.
struct Frame {
  double voiced = 0, unvoiced = 0;
  double f1 = 500, f2 = 1500, f3 = 2500;
  double noise_hz = 2000;
};

// RBJ band-pass biquad, constant peak gain.
struct Biquad {
  double b0 = 0, b2 = 0, a1 = 0, a2 = 0, x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  void set(double centre, double q, double rate) {
    const double w = 2 * kPi * std::min(centre, 0.45 * rate) / rate;
    const double alpha = std::sin(w) / (2 * q);
    const double a0 = 1 + alpha;
    b0 = alpha / a0;
    b2 = -alpha / a0;
    a1 = -2 * std::cos(w) / a0;
    a2 = (1 - alpha) / a0;
  }
  double operator()(double x) {
    const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

double resonance(double f, double centre, double bw) {
  const double d = (f - centre) / bw;
  return 1.0 / (1.0 + d * d);
}

}  // namespace

SpeakerVoice make_speaker_voice(std::size_t speaker_index, std::size_t n_speakers, std::uint64_t seed) {
  std::seed_seq seq{seed, std::uint64_t{0x5eed}, static_cast<std::uint64_t>(speaker_index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SpeakerVoice v;
  // Fundamentals spread over 80 - 300 Hz on a log scale, jittered within the slot.
  const double slot = (static_cast<double>(speaker_index) + 0.2 + 0.6 * u(rng)) / static_cast<double>(n_speakers);
  v.f0_hz = 80.0 * std::pow(300.0 / 80.0, slot);
  v.formant_scale = 0.85 + 0.35 * u(rng);
  v.tilt_db_per_oct = -9.0 + 6.0 * u(rng);
  v.breathiness = 0.02 + 0.1 * u(rng);
  for (int k = 0; k < 3; ++k) {
    v.timbre_hz.push_back(400.0 * std::pow(12.0, u(rng)));  // 400 Hz - 4.8 kHz
    v.timbre_gain.push_back(0.5 + 1.5 * u(rng));
  }
  return v;
}

std::string make_transcript(std::mt19937_64& rng, double min_duration_s) {
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::string text;
  // Rendering may shorten segments by up to 0.95 * 0.9; aim above the minimum.
  while (text.empty() || nominal_duration_s(text) * 0.855 < min_duration_s) {
    if (!text.empty()) text += ' ';
    text += kWords[pick(rng)];
  }
  return text;
}

audio::Waveform render_utterance(const SpeakerVoice& voice, const std::string& text, int sample_rate,
                                 std::mt19937_64& rng) {
  if (text.empty()) throw Error(Errc::EmptyInput, "render_utterance: empty text");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rate = sample_rate;

  // Segment targets with per-utterance tempo jitter.
  const double tempo = 0.95 + 0.15 * u(rng);
  struct Target {
    Frame f;
    std::size_t len;
  };
  std::vector<Target> targets;
  auto add_pause = [&](double ms) { targets.push_back({Frame{}, static_cast<std::size_t>(ms * rate / 1000.0)}); };
  add_pause(50);
  for (char c : text) {
    const Phone p = phone_for(c);
    Frame f;
    const double a = voice.formant_scale;
    switch (p.kind) {
      case Seg::Vowel: f.voiced = 1.0; break;
      case Seg::Voiced: f.voiced = 0.45; break;
      case Seg::Unvoiced: f.unvoiced = 0.35; break;
      case Seg::Pause: break;
    }
    if (p.kind == Seg::Unvoiced) {
      f.noise_hz = p.f1 * a;
    } else if (p.kind != Seg::Pause) {
      f.f1 = p.f1 * a;
      f.f2 = p.f2 * a;
      f.f3 = p.f3 * a;
    }
    const double jitter = 0.9 + 0.2 * u(rng);
    targets.push_back({f, static_cast<std::size_t>(p.dur_ms * tempo * jitter * rate / 1000.0)});
  }
  add_pause(50);
  std::size_t total = 0;
  for (const auto& t : targets) total += t.len;

  // Pause frames keep the neighbouring formants so transitions only fade level.
  for (std::size_t i = 1; i < targets.size(); ++i)
    if (targets[i].f.voiced == 0 && targets[i].f.unvoiced == 0) {
      targets[i].f.f1 = targets[i - 1].f.f1;
      targets[i].f.f2 = targets[i - 1].f.f2;
      targets[i].f.f3 = targets[i - 1].f.f3;
    }

  const double f0_base = voice.f0_hz * (0.94 + 0.12 * u(rng));
  const double vib_hz = 3.0 + 2.0 * u(rng);
  const double vib_phase = 2 * kPi * u(rng);
  const double level = 0.6 + 0.35 * u(rng);
  const double nyq_limit = std::min(0.45 * rate, 10000.0);
  const std::size_t max_harm = static_cast<std::size_t>(nyq_limit / 60.0) + 1;

  audio::Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(total, 0.0f);

  constexpr std::size_t kBlock = 64;
  const std::size_t xfade = static_cast<std::size_t>(0.015 * rate);
  std::vector<std::complex<double>> osc(max_harm, {1.0, 0.0});
  std::vector<double> amp(max_harm, 0.0), amp_prev(max_harm, 0.0);
  Biquad noise_filter;
  std::size_t seg = 0, seg_start = 0;
  for (std::size_t b0 = 0; b0 < total; b0 += kBlock) {
    const std::size_t b1 = std::min(total, b0 + kBlock);
    const std::size_t mid = (b0 + b1) / 2;
    while (seg + 1 < targets.size() && mid >= seg_start + targets[seg].len) seg_start += targets[seg++].len;
    // Blend toward the next segment over the last xfade samples of this one.
    Frame f = targets[seg].f;
    const std::size_t seg_end = seg_start + targets[seg].len;
    if (seg + 1 < targets.size() && mid + xfade > seg_end) {
      const double t = 0.5 * (1.0 - static_cast<double>(seg_end - mid) / xfade);
      const Frame& g = targets[seg + 1].f;
      f.voiced += t * (g.voiced - f.voiced);
      f.unvoiced += t * (g.unvoiced - f.unvoiced);
      f.f1 += t * (g.f1 - f.f1);
      f.f2 += t * (g.f2 - f.f2);
      f.f3 += t * (g.f3 - f.f3);
    }
    if (seg > 0 && mid < seg_start + xfade) {
      const double t = 0.5 * (1.0 - static_cast<double>(mid - seg_start) / xfade);
      const Frame& g = targets[seg - 1].f;
      f.voiced += t * (g.voiced - f.voiced);
      f.unvoiced += t * (g.unvoiced - f.unvoiced);
      f.f1 += t * (g.f1 - f.f1);
      f.f2 += t * (g.f2 - f.f2);
      f.f3 += t * (g.f3 - f.f3);
    }

    const double time = static_cast<double>(mid) / rate;
    const double progress = static_cast<double>(mid) / static_cast<double>(total);
    const double f0 = f0_base * (1.05 - 0.12 * progress) * (1.0 + 0.03 * std::sin(2 * kPi * vib_hz * time + vib_phase));

    // Harmonic amplitudes from source tilt, vocal tract formants and speaker timbre.
    const std::size_t n_harm = std::min(max_harm, static_cast<std::size_t>(nyq_limit / f0));
    for (std::size_t k = 0; k < max_harm; ++k) {
      if (k >= n_harm || f.voiced <= 0) {
        amp[k] = 0.0;
        continue;
      }
      const double hz = (k + 1) * f0;
      const double tilt = std::pow(10.0, voice.tilt_db_per_oct * std::log2(hz / 100.0) / 20.0);
      double tract = 0.03 + resonance(hz, f.f1, 80) + 0.7 * resonance(hz, f.f2, 110) + 0.4 * resonance(hz, f.f3, 150);
      double timbre = 1.0;
      for (std::size_t r = 0; r < voice.timbre_hz.size(); ++r)
        timbre += voice.timbre_gain[r] * resonance(hz, voice.timbre_hz[r], 250);
      amp[k] = f.voiced * tilt * tract * timbre;
    }
    noise_filter.set(f.noise_hz, 2.0, rate);
    const double noise_level = f.unvoiced + voice.breathiness * f.voiced;

    std::vector<std::complex<double>> step(n_harm);
    for (std::size_t k = 0; k < n_harm; ++k) step[k] = std::polar(1.0, 2 * kPi * (k + 1) * f0 / rate);
    for (std::size_t n = b0; n < b1; ++n) {
      const double frac = static_cast<double>(n - b0) / static_cast<double>(b1 - b0);
      double s = 0.0;
      for (std::size_t k = 0; k < n_harm; ++k) {
        osc[k] *= step[k];
        s += (amp_prev[k] + frac * (amp[k] - amp_prev[k])) * osc[k].imag();
      }
      s += noise_level * noise_filter(gauss(rng));
      w.samples[n] = static_cast<float>(s);
    }
    for (std::size_t k = 0; k < n_harm; ++k) osc[k] /= std::abs(osc[k]);
    amp_prev = amp;
  }

  float peak = 0.0f;
  for (float s : w.samples) peak = std::max(peak, std::abs(s));
  if (peak > 0.0f)
    for (float& s : w.samples) s = static_cast<float>(s * level / peak);
  return w;
}

DatasetManifest generate_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusConfig& config) {
  if (config.n_speakers < 2) throw Error(Errc::ConfigError, "synthetic corpus needs at least 2 speakers");
  if (config.utts_per_speaker == 0 || config.test_per_speaker > config.utts_per_speaker)
    throw Error(Errc::ConfigError, "test_per_speaker must not exceed utts_per_speaker");
  std::filesystem::create_directories(root);
  DatasetManifest manifest(root);
  char name[32];
  for (std::size_t s = 0; s < config.n_speakers; ++s) {
    std::snprintf(name, sizeof(name), "spk%02zu", s);
    const std::string speaker = name;
    std::filesystem::create_directories(root / speaker);
    const SpeakerVoice voice = make_speaker_voice(s, config.n_speakers, config.seed);
    for (std::size_t u = 0; u < config.utts_per_speaker; ++u) {
      std::seed_seq seq{config.seed, std::uint64_t{0xa11d10}, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(u)};
      std::mt19937_64 rng(seq);
      const std::string text = make_transcript(rng, config.min_duration_s);
      const audio::Waveform w = render_utterance(voice, text, config.sample_rate, rng);
      std::snprintf(name, sizeof(name), "_u%03zu", u);
      const std::string utt = speaker + name;
      const std::string rel = speaker + "/" + utt + ".wav";
      audio::write_wav(root / rel, w);
      const Split split = u + config.test_per_speaker >= config.utts_per_speaker ? Split::Test : Split::Train;
      manifest.add({speaker, utt, rel, text, static_cast<double>(w.size()) / w.sample_rate, split});
    }
  }
  write_manifest(manifest, root / "manifest.tsv");
  return manifest;
}

}  // namespace clonecraft::data
