#pragma once

#include <random>
#include <string>
#include <vector>

#include "clonecraft/audio/partials.hpp"
#include "clonecraft/data/manifest.hpp"

namespace clonecraft::data {

// An utterance with its encoder-config mel features.
struct Utterance {
  std::string speaker_id;
  std::string utterance_id;
  audio::MelSpectrogram mel;
};

// Reads, resamples and featurises every entry (MissingAsset on absent audio).
std::vector<Utterance> load_encoder_features(const DatasetManifest& manifest);

struct SpeakerBatchSpec {
  std::size_t n_speakers = 8;
  std::size_t m_utterances = 4;
  void validate() const;  // BatchTooSmall unless N >= 2 and M >= 2
};

// N*M windows, speaker-major (row j*M + i is utterance i of speaker j).
struct SpeakerBatch {
  std::vector<std::string> speakers;
  std::vector<audio::PartialWindow> windows;
  std::vector<std::size_t> pool_index;  // which pool utterance each window came from
};

SpeakerBatch sample_batch(const std::vector<Utterance>& pool, const SpeakerBatchSpec& spec, std::mt19937_64& rng);

// Holds a private generator; one instance per training loop.
class SpeakerBatchSampler {
 public:
  SpeakerBatchSampler(const std::vector<Utterance>& pool, SpeakerBatchSpec spec, std::uint64_t seed);

  SpeakerBatch next() { return sample_batch(*pool_, spec_, rng_); }
  std::mt19937_64& rng() { return rng_; }
  const std::mt19937_64& rng() const { return rng_; }
  const SpeakerBatchSpec& spec() const { return spec_; }

 private:
  const std::vector<Utterance>* pool_;
  SpeakerBatchSpec spec_;
  std::mt19937_64 rng_;
};

}  // namespace clonecraft::data
