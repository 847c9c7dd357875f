#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "clonecraft/audio/waveform.hpp"
#include "clonecraft/data/manifest.hpp"

namespace clonecraft::data {

// Fixed per-speaker voice template.
struct SpeakerVoice {
  double f0_hz = 120.0;         // 80 - 300 Hz
  double formant_scale = 1.0;   // vocal tract length factor
  double tilt_db_per_oct = -6;  // source spectral slope
  double breathiness = 0.05;    // aspiration noise relative to voicing
  std::vector<double> timbre_hz;    // extra resonances fixed for the speaker
  std::vector<double> timbre_gain;  // their relative gains
};

struct SyntheticCorpusConfig {
  std::size_t n_speakers = 10;
  std::size_t utts_per_speaker = 20;
  // The last test_per_speaker utterances of each speaker go to the test split.
  std::size_t test_per_speaker = 8;
  double min_duration_s = 1.8;
  int sample_rate = audio::kSynthSampleRate;
  std::uint64_t seed = 1;
};

SpeakerVoice make_speaker_voice(std::size_t speaker_index, std::size_t n_speakers, std::uint64_t seed);

// Random transcript of whole words whose rendered length reaches min_duration_s.
std::string make_transcript(std::mt19937_64& rng, double min_duration_s);

// Renders text with the given voice. Each character becomes a short segment
// (vowel, voiced consonant, unvoiced consonant or pause) so audio stays
// loosely aligned with the transcript.
audio::Waveform render_utterance(const SpeakerVoice& voice, const std::string& text, int sample_rate,
                                 std::mt19937_64& rng);

// Writes <root>/<speaker>/<utterance>.wav and <root>/manifest.tsv.
DatasetManifest generate_synthetic_corpus(const std::filesystem::path& root, const SyntheticCorpusConfig& config);

}  // namespace clonecraft::data
