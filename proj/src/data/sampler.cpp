#include "clonecraft/data/sampler.hpp"

#include <map>
#include <numeric>

#include "clonecraft/core/error.hpp"

namespace clonecraft::data {

std::vector<Utterance> load_encoder_features(const DatasetManifest& manifest) {
  const auto cfg = audio::MelConfig::encoder();
  std::vector<Utterance> out;
  out.reserve(manifest.size());
  for (const auto& e : manifest.entries()) {
    const auto wave = audio::load_for_analysis(manifest.resolve(e), cfg.sample_rate);
    out.push_back({e.speaker_id, e.utterance_id, audio::compute_mel(wave, cfg)});
  }
  return out;
}

void SpeakerBatchSpec::validate() const {
  if (n_speakers < 2 || m_utterances < 2)
    throw Error(Errc::BatchTooSmall, "speaker batches need N >= 2 speakers and M >= 2 utterances");
}

SpeakerBatch sample_batch(const std::vector<Utterance>& pool, const SpeakerBatchSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  // Eligible utterances grouped by speaker, in pool order.
  std::vector<std::string> speakers;
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].mel.num_frames() < audio::kPartialFrames) continue;
    auto& v = by_speaker[pool[i].speaker_id];
    if (v.empty()) speakers.push_back(pool[i].speaker_id);
    v.push_back(i);
  }
  if (speakers.size() < spec.n_speakers)
    throw Error(Errc::SamplerError, "need " + std::to_string(spec.n_speakers) + " eligible speakers, have " +
                                        std::to_string(speakers.size()));

  // Partial Fisher-Yates picks N distinct speakers uniformly.
  for (std::size_t j = 0; j < spec.n_speakers; ++j) {
    std::uniform_int_distribution<std::size_t> d(j, speakers.size() - 1);
    std::swap(speakers[j], speakers[d(rng)]);
  }
  speakers.resize(spec.n_speakers);

  SpeakerBatch batch;
  batch.speakers = speakers;
  for (const auto& spk : speakers) {
    std::vector<std::size_t> utts = by_speaker[spk];
    std::vector<std::size_t> chosen;
    if (utts.size() >= spec.m_utterances) {
      for (std::size_t i = 0; i < spec.m_utterances; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, utts.size() - 1);
        std::swap(utts[i], utts[d(rng)]);
        chosen.push_back(utts[i]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> d(0, utts.size() - 1);
      for (std::size_t i = 0; i < spec.m_utterances; ++i) chosen.push_back(utts[d(rng)]);
    }
    for (std::size_t idx : chosen) {
      batch.windows.push_back(audio::sample_training_crop(pool[idx].mel, rng, audio::kPartialFrames,
                                                          pool[idx].utterance_id));
      batch.pool_index.push_back(idx);
    }
  }
  return batch;
}

SpeakerBatchSampler::SpeakerBatchSampler(const std::vector<Utterance>& pool, SpeakerBatchSpec spec,
                                         std::uint64_t seed)
    : pool_(&pool), spec_(spec), rng_(seed) {
  spec_.validate();
}

}  // namespace clonecraft::data
