#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "clonecraft/data/manifest.hpp"
#include "clonecraft/encoder/encoder.hpp"
#include "clonecraft/eval/similarity.hpp"
#include "clonecraft/synth/synthesizer.hpp"
#include "clonecraft/vocoder/inversion.hpp"

namespace clonecraft::eval {

// Resample to 16 kHz, peak-normalise, encoder mel, embed_utterance.
encoder::EmbeddingVector embed_waveform(const encoder::EncoderModel& model, const audio::Waveform& wave,
                                        const std::string& id = {});

struct CloneResult {
  encoder::EmbeddingVector reference_embedding;
  audio::MelSpectrogram mel;
  audio::Waveform wave;
  bool non_converged_stop = false;
};

// reference audio -> utterance embedding -> synthesizer inference -> inversion.
CloneResult clone_voice(const encoder::EncoderModel& encoder, const synth::Synthesizer& synthesizer,
                        const audio::Waveform& reference, std::string_view text,
                        const vocoder::InversionConfig& inversion, std::uint64_t seed);

struct GeneratedSet {
  std::vector<LabeledEmbedding> generated;
  std::vector<LabeledEmbedding> groundtruth;
};

// For the first per_speaker entries of each speaker: groundtruth is the
// embedding of the recorded utterance; generated is the embedding of audio
// synthesised from its transcript, conditioned on that same utterance's
// embedding.
GeneratedSet generate_for_similarity(const encoder::EncoderModel& encoder, const synth::Synthesizer& synthesizer,
                                     const data::DatasetManifest& manifest, std::size_t per_speaker,
                                     const vocoder::InversionConfig& inversion, std::uint64_t seed);

}  // namespace clonecraft::eval
