#include "clonecraft/eval/eer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace clonecraft::eval {

EERResult compute_eer(const std::vector<Trial>& trials) {
  std::vector<double> gen, imp;
  for (const auto& t : trials) (t.is_genuine ? gen : imp).push_back(t.score);
  if (gen.empty() || imp.empty()) throw Error(Errc::ProtocolError, "EER needs both genuine and impostor trials");
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  std::vector<double> thresholds;
  thresholds.reserve(trials.size() + 1);
  for (const auto& t : trials) thresholds.push_back(t.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const double ng = static_cast<double>(gen.size()), ni = static_cast<double>(imp.size());
  auto far = [&](double t) {  // impostors accepted
    return static_cast<double>(imp.end() - std::lower_bound(imp.begin(), imp.end(), t)) / ni;
  };
  auto frr = [&](double t) {  // genuines rejected
    return static_cast<double>(std::lower_bound(gen.begin(), gen.end(), t) - gen.begin()) / ng;
  };

  EERResult r;
  r.n_genuine = gen.size();
  r.n_impostor = imp.size();
  // FAR falls and FRR rises along the sweep; find the first point where FRR >= FAR.
  double prev_far = far(thresholds[0]), prev_frr = frr(thresholds[0]);
  if (prev_frr >= prev_far) {
    r.eer = 0.5 * (prev_far + prev_frr);
    r.threshold = thresholds[0];
    return r;
  }
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const double fa = far(thresholds[i]), fr = frr(thresholds[i]);
    if (fr >= fa) {
      // d(t) = FRR - FAR changes sign between i-1 and i.
      const double d0 = prev_frr - prev_far, d1 = fr - fa;
      const double a = d0 / (d0 - d1);
      r.eer = prev_far + a * (fa - prev_far);
      const double t0 = thresholds[i - 1], t1 = thresholds[i];
      r.threshold = std::isinf(t1) ? t0 : t0 + a * (t1 - t0);
      return r;
    }
    prev_far = fa;
    prev_frr = fr;
  }
  r.eer = 0.5 * (prev_far + prev_frr);
  r.threshold = thresholds.back();
  return r;
}

ProtocolResult sv_eer_protocol(const std::vector<std::string>& speakers,
                               const std::vector<encoder::EmbeddingVector>& embeddings,
                               std::size_t enroll_per_speaker) {
  if (speakers.size() != embeddings.size()) throw Error(Errc::ShapeError, "speaker / embedding count mismatch");
  if (enroll_per_speaker == 0) throw Error(Errc::ProtocolError, "enroll_per_speaker must be positive");
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < speakers.size(); ++i) {
    auto& v = by_speaker[speakers[i]];
    if (v.empty()) order.push_back(speakers[i]);
    v.push_back(i);
  }
  std::vector<std::vector<float>> centroids;
  for (const auto& spk : order) {
    const auto& idx = by_speaker[spk];
    if (idx.size() <= enroll_per_speaker)
      throw Error(Errc::ProtocolError, "speaker " + spk + " has " + std::to_string(idx.size()) +
                                           " utterances; needs more than " + std::to_string(enroll_per_speaker));
    std::vector<encoder::EmbeddingVector> enroll;
    for (std::size_t k = 0; k < enroll_per_speaker; ++k) enroll.push_back(embeddings[idx[k]]);
    centroids.push_back(encoder::average_normalized([&] {
      std::vector<std::vector<float>> v;
      for (const auto& e : enroll) v.push_back(e.values);
      return v;
    }()));
  }
  ProtocolResult out;
  for (std::size_t s = 0; s < order.size(); ++s) {
    const auto& idx = by_speaker[order[s]];
    for (std::size_t k = enroll_per_speaker; k < idx.size(); ++k) {
      const auto& e = embeddings[idx[k]];
      for (std::size_t c = 0; c < order.size(); ++c)
        out.trials.push_back({encoder::cosine(e.values, centroids[c]), c == s, order[c], e.source});
    }
  }
  out.eer = compute_eer(out.trials);
  return out;
}

ProtocolResult sv_eer_protocol(const encoder::EncoderModel& model, const std::vector<data::Utterance>& pool,
                               std::size_t enroll_per_speaker) {
  std::vector<std::string> speakers;
  std::vector<encoder::EmbeddingVector> embeddings;
  for (const auto& u : pool) {
    speakers.push_back(u.speaker_id);
    embeddings.push_back(encoder::embed_utterance(model, u.mel, audio::ShortInput::Padded, u.utterance_id));
  }
  return sv_eer_protocol(speakers, embeddings, enroll_per_speaker);
}

}  // namespace clonecraft::eval
