#pragma once

#include <random>
#include <string>
#include <vector>

#include "clonecraft/audio/mel.hpp"

namespace clonecraft::audio {

inline constexpr std::size_t kPartialFrames = 160;

// A fixed-length slice of an utterance's mel frames.
struct PartialWindow {
  MatrixF frames;  // [frame_len, n_mels]
  std::string source_utterance_id;
  std::size_t start_frame = 0;
};

enum class ShortInput {
  Strict,  // T < frame_len raises TooShort
  Padded,  // T < frame_len is extended to frame_len by cyclic repetition
};

// Window starts at multiples of frame_len * (1 - overlap); when the last
// regular window stops short of T a final window anchored at T - frame_len
// is appended, so every frame is covered.
std::vector<std::size_t> partial_starts(std::size_t num_frames, std::size_t frame_len = kPartialFrames,
                                        double overlap = 0.5);

std::vector<PartialWindow> slice_partials(const MelSpectrogram& mel, std::size_t frame_len = kPartialFrames,
                                          double overlap = 0.5, ShortInput mode = ShortInput::Padded,
                                          const std::string& utterance_id = {});

// Uniform random crop of frame_len frames; TooShort when T < frame_len.
PartialWindow sample_training_crop(const MelSpectrogram& mel, std::mt19937_64& rng,
                                   std::size_t frame_len = kPartialFrames, const std::string& utterance_id = {});

}  // namespace clonecraft::audio
