#include "clonecraft/eval/pipeline.hpp"

#include <map>

namespace clonecraft::eval {

encoder::EmbeddingVector embed_waveform(const encoder::EncoderModel& model, const audio::Waveform& wave,
                                        const std::string& id) {
  const auto w = audio::normalize_peak(audio::resample(wave, audio::kEncoderSampleRate));
  const auto mel = audio::compute_mel(w, audio::MelConfig::encoder());
  return encoder::embed_utterance(model, mel, audio::ShortInput::Padded, id);
}

CloneResult clone_voice(const encoder::EncoderModel& encoder, const synth::Synthesizer& synthesizer,
                        const audio::Waveform& reference, std::string_view text,
                        const vocoder::InversionConfig& inversion, std::uint64_t seed) {
  CloneResult r;
  r.reference_embedding = embed_waveform(encoder, reference, "reference");
  r.mel = synthesizer.infer_mel(synth::text_to_sequence(text), r.reference_embedding.values, seed,
                                &r.non_converged_stop);
  auto inv = inversion;
  inv.seed = seed;
  r.wave = vocoder::invert_mel(r.mel, inv);
  return r;
}

GeneratedSet generate_for_similarity(const encoder::EncoderModel& encoder, const synth::Synthesizer& synthesizer,
                                     const data::DatasetManifest& manifest, std::size_t per_speaker,
                                     const vocoder::InversionConfig& inversion, std::uint64_t seed) {
  GeneratedSet out;
  std::map<std::string, std::size_t> taken;
  for (const auto& e : manifest.entries()) {
    if (taken[e.speaker_id]++ >= per_speaker) continue;
    const auto ref = audio::read_wav(manifest.resolve(e));
    const auto c = clone_voice(encoder, synthesizer, ref, e.transcript, inversion, seed);
    out.groundtruth.push_back({e.speaker_id, c.reference_embedding});
    out.generated.push_back({e.speaker_id, embed_waveform(encoder, c.wave, e.utterance_id + "_generated")});
  }
  return out;
}

}  // namespace clonecraft::eval
