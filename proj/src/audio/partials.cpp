#include "clonecraft/audio/partials.hpp"

#include <algorithm>
#include <cmath>

#include "clonecraft/core/error.hpp"

namespace clonecraft::audio {
namespace {

PartialWindow copy_window(const MelSpectrogram& mel, std::size_t start, std::size_t len, const std::string& id) {
  PartialWindow w;
  w.frames = MatrixF(len, mel.n_mels());
  const std::size_t n = mel.n_mels();
  std::copy(mel.frames.data() + start * n, mel.frames.data() + (start + len) * n, w.frames.data());
  w.source_utterance_id = id;
  w.start_frame = start;
  return w;
}

}  // namespace

std::vector<std::size_t> partial_starts(std::size_t num_frames, std::size_t frame_len, double overlap) {
  if (frame_len == 0 || !(overlap >= 0.0) || !(overlap < 1.0)) {
    throw Error(Errc::ConfigError, "partial_starts: need frame_len > 0 and 0 <= overlap < 1");
  }
  if (num_frames < frame_len) return {};
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(frame_len * (1.0 - overlap))));
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + frame_len <= num_frames; s += step) starts.push_back(s);
  if (starts.back() + frame_len < num_frames) starts.push_back(num_frames - frame_len);
  return starts;
}

std::vector<PartialWindow> slice_partials(const MelSpectrogram& mel, std::size_t frame_len, double overlap,
                                          ShortInput mode, const std::string& utterance_id) {
  const std::size_t T = mel.num_frames();
  if (T == 0) throw Error(Errc::EmptyInput, "slice_partials: no frames");
  if (T < frame_len) {
    if (mode == ShortInput::Strict) {
      throw Error(Errc::TooShort, "slice_partials: " + std::to_string(T) + " frames < " + std::to_string(frame_len));
    }
    PartialWindow w;
    w.frames = MatrixF(frame_len, mel.n_mels());
    for (std::size_t t = 0; t < frame_len; ++t) {
      const auto src = mel.frames.row(t % T);
      std::copy(src.begin(), src.end(), w.frames.row(t).begin());
    }
    w.source_utterance_id = utterance_id;
    w.start_frame = 0;
    return {std::move(w)};
  }
  std::vector<PartialWindow> out;
  for (std::size_t s : partial_starts(T, frame_len, overlap)) out.push_back(copy_window(mel, s, frame_len, utterance_id));
  return out;
}

PartialWindow sample_training_crop(const MelSpectrogram& mel, std::mt19937_64& rng, std::size_t frame_len,
                                   const std::string& utterance_id) {
  const std::size_t T = mel.num_frames();
  if (T < frame_len) {
    throw Error(Errc::TooShort, "sample_training_crop: " + std::to_string(T) + " frames < " + std::to_string(frame_len));
  }
  std::uniform_int_distribution<std::size_t> d(0, T - frame_len);
  return copy_window(mel, d(rng), frame_len, utterance_id);
}

}  // namespace clonecraft::audio
