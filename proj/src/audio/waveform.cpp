#include "clonecraft/audio/waveform.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "clonecraft/core/error.hpp"

namespace clonecraft::audio {
namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

template <class T>
T read_le(const std::vector<char>& buf, std::size_t off) {
  if (off + sizeof(T) > buf.size()) throw Error(Errc::FormatError, "truncated WAV header");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return v;
}

template <class T>
void put_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingAsset, "cannot open audio file " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 || std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw Error(Errc::FormatError, "not a RIFF/WAVE file: " + path.string());
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t data_off = 0, data_len = 0;
  std::size_t off = 12;
  while (off + 8 <= buf.size()) {
    const std::string id(buf.data() + off, 4);
    const auto len = read_le<std::uint32_t>(buf, off + 4);
    const std::size_t body = off + 8;
    if (id == "fmt ") {
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == 0xFFFE && len >= 40) format = read_le<std::uint16_t>(buf, body + 24);
    } else if (id == "data") {
      data_off = body;
      data_len = std::min<std::size_t>(len, buf.size() - body);
      break;
    }
    off = body + len + (len & 1u);
  }
  if (channels == 0 || rate == 0 || data_off == 0) throw Error(Errc::FormatError, "missing fmt or data chunk");
  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32) throw Error(Errc::FormatError, "unsupported WAV encoding (need 16-bit PCM or 32-bit float)");

  const std::size_t bytes = bits / 8;
  const std::size_t frames = data_len / (bytes * channels);
  Waveform w;
  w.sample_rate = static_cast<int>(rate);
  w.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    float acc = 0.0f;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t p = data_off + (i * channels + c) * bytes;
      if (pcm16) {
        std::int16_t s;
        std::memcpy(&s, buf.data() + p, 2);
        acc += static_cast<float>(s) / 32768.0f;
      } else {
        float s;
        std::memcpy(&s, buf.data() + p, 4);
        acc += s;
      }
    }
    w.samples[i] = acc / static_cast<float>(channels);
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  os.write("RIFF", 4);
  put_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_le<std::uint32_t>(os, 16);
  put_le<std::uint16_t>(os, 1);
  put_le<std::uint16_t>(os, 1);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(wave.sample_rate));
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  put_le<std::uint16_t>(os, 2);
  put_le<std::uint16_t>(os, 16);
  os.write("data", 4);
  put_le<std::uint32_t>(os, data_bytes);
  for (float s : wave.samples) {
    const float c = std::clamp(s, -1.0f, 1.0f);
    put_le<std::int16_t>(os, static_cast<std::int16_t>(std::lrint(c * 32767.0f)));
  }
  if (!os) throw Error(Errc::IoError, "short write to " + path.string());
}

Waveform normalize_peak(Waveform wave, float peak) {
  float mx = 0.0f;
  for (float s : wave.samples) mx = std::max(mx, std::abs(s));
  if (mx > 0.0f) {
    const float g = peak / mx;
    for (float& s : wave.samples) s *= g;
  }
  return wave;
}

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw Error(Errc::ConfigError, "resample: target rate must be positive");
  if (wave.sample_rate == target_rate || wave.empty()) {
    Waveform out = wave;
    out.sample_rate = target_rate;
    return out;
  }
  const double ratio = static_cast<double>(target_rate) / wave.sample_rate;
  const double bw = std::min(1.0, ratio) * 0.95;  // passband as a fraction of input Nyquist
  const double fc = 0.5 * bw;                     // cycles per input sample
  const int half = static_cast<int>(std::ceil(16.0 / std::min(1.0, ratio)));
  const std::size_t n_out = static_cast<std::size_t>(std::ceil(wave.size() * ratio));
  const long n_in = static_cast<long>(wave.size());
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const double t = n / ratio;
    const long centre = static_cast<long>(std::floor(t));
    double acc = 0.0;
    for (long k = centre - half + 1; k <= centre + half; ++k) {
      if (k < 0 || k >= n_in) continue;
      const double x = t - k;
      const double arg = 2.0 * fc * x;
      const double sinc = std::abs(arg) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
      const double win = 0.5 + 0.5 * std::cos(std::numbers::pi * x / half);
      acc += wave.samples[static_cast<std::size_t>(k)] * 2.0 * fc * sinc * win;
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

Waveform load_for_analysis(const std::filesystem::path& path, int target_rate) {
  return normalize_peak(resample(read_wav(path), target_rate), 0.95f);
}

float rms(const Waveform& wave) {
  if (wave.empty()) return 0.0f;
  double acc = 0.0;
  for (float s : wave.samples) acc += static_cast<double>(s) * s;
  return static_cast<float>(std::sqrt(acc / wave.size()));
}

}  // namespace clonecraft::audio
