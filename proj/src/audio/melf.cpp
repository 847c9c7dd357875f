#include "clonecraft/audio/melf.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "clonecraft/core/error.hpp"

namespace clonecraft::audio {
namespace {

static_assert(std::endian::native == std::endian::little, "MELF I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error(Errc::FormatError, "MELF: truncated header");
  return v;
}

}  // namespace

void write_melf(std::ostream& os, const MelSpectrogram& mel) {
  if (mel.n_mels() > 0xFFFF || mel.num_frames() > 0xFFFFFFFFull) {
    throw Error(Errc::FormatError, "MELF: dimensions exceed header limits");
  }
  os.write("MELF", 4);
  put<std::uint16_t>(os, kMelfVersion);
  put<std::uint16_t>(os, static_cast<std::uint16_t>(mel.n_mels()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(mel.num_frames()));
  put<float>(os, static_cast<float>(mel.config.hop_ms));
  os.write(reinterpret_cast<const char*>(mel.frames.data()),
           static_cast<std::streamsize>(mel.frames.size() * sizeof(float)));
  if (!os) throw Error(Errc::IoError, "MELF: write failed");
}

void write_melf(const std::filesystem::path& path, const MelSpectrogram& mel) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::IoError, "MELF: cannot open " + path.string());
  write_melf(os, mel);
}

MelSpectrogram read_melf(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "MELF", 4) != 0) throw Error(Errc::FormatError, "MELF: bad magic");
  const auto version = get<std::uint16_t>(is);
  if (version != kMelfVersion) throw Error(Errc::FormatError, "MELF: unsupported version " + std::to_string(version));
  const auto n_mels = get<std::uint16_t>(is);
  const auto frames = get<std::uint32_t>(is);
  const auto hop_ms = get<float>(is);
  MelSpectrogram mel;
  const MelConfig enc = MelConfig::encoder(), syn = MelConfig::synthesizer();
  if (n_mels == enc.n_mels && hop_ms == static_cast<float>(enc.hop_ms)) {
    mel.config = enc;
  } else if (n_mels == syn.n_mels && hop_ms == static_cast<float>(syn.hop_ms)) {
    mel.config = syn;
  } else {
    mel.config.sample_rate = 0;
    mel.config.n_mels = n_mels;
    mel.config.hop_ms = hop_ms;
  }
  mel.frames = MatrixF(frames, n_mels);
  if (!is.read(reinterpret_cast<char*>(mel.frames.data()),
               static_cast<std::streamsize>(mel.frames.size() * sizeof(float)))) {
    throw Error(Errc::FormatError, "MELF: truncated payload");
  }
  return mel;
}

MelSpectrogram read_melf(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::MissingAsset, "MELF: cannot open " + path.string());
  return read_melf(is);
}

}  // namespace clonecraft::audio
