#pragma once

#include <map>
#include <string>
#include <vector>

#include "clonecraft/data/sampler.hpp"
#include "clonecraft/encoder/encoder.hpp"

namespace clonecraft::eval {

struct Trial {
  double score = 0;
  bool is_genuine = false;
  std::string enrolled_speaker;
  std::string test_utterance;
};

struct EERResult {
  double eer = 0;
  double threshold = 0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

// Sweeps every distinct score as a threshold (accept when score >= t). FAR
// and FRR are piecewise constant in t; the EER is taken where the two curves
// cross, interpolating linearly between the adjacent sweep points.
// ProtocolError unless both classes are present.
EERResult compute_eer(const std::vector<Trial>& trials);

// Reference full-scale SV-EERs, documentation only.
inline const std::map<std::string, double> kReferenceEer = {
    {"advanced_gru", 0.040}, {"lstm", 0.052}, {"gru", 0.054}, {"rec_conv", 0.073}, {"rec_conv_2", 0.075},
    {"baseline", 0.049}};

struct ProtocolResult {
  EERResult eer;
  std::vector<Trial> trials;
};

// For each speaker the first enroll_per_speaker utterances (pool order) form a
// normalised enrollment centroid; each remaining utterance is scored by cosine
// against every centroid. ProtocolError when a speaker has too few utterances.
ProtocolResult sv_eer_protocol(const encoder::EncoderModel& model, const std::vector<data::Utterance>& pool,
                               std::size_t enroll_per_speaker = 6);

// Same protocol over precomputed utterance embeddings.
ProtocolResult sv_eer_protocol(const std::vector<std::string>& speakers,
                               const std::vector<encoder::EmbeddingVector>& embeddings,
                               std::size_t enroll_per_speaker = 6);

}  // namespace clonecraft::eval
