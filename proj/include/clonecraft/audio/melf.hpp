#pragma once

#include <filesystem>
#include <iosfwd>

#include "clonecraft/audio/mel.hpp"

namespace clonecraft::audio {

// MELF layout (little-endian):
//   "MELF" | u16 version | u16 n_mels | u32 frames | f32 hop_ms | frames*n_mels f32 (row-major by frame)
inline constexpr std::uint16_t kMelfVersion = 1;

void write_melf(std::ostream& os, const MelSpectrogram& mel);
void write_melf(const std::filesystem::path& path, const MelSpectrogram& mel);

// The returned config is the matching preset (encoder or synthesizer) when
// n_mels and hop_ms identify one; otherwise only n_mels and hop_ms are set
// and sample_rate is 0. Bad magic, version or size -> FormatError.
MelSpectrogram read_melf(std::istream& is);
MelSpectrogram read_melf(const std::filesystem::path& path);

}  // namespace clonecraft::audio
