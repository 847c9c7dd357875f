#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clonecraft/encoder/encoder.hpp"
#include "clonecraft/eval/eer.hpp"

namespace clonecraft::eval {

using LabeledEmbedding = std::pair<std::string, encoder::EmbeddingVector>;

struct SimilarityReport {
  // Mean cosine over all (generated, groundtruth) pairs of the same speaker.
  std::map<std::string, double> same_speaker;
  // Mean cosine of a speaker's generated embeddings against every other
  // speaker's groundtruth. Empty when only one speaker is present.
  std::map<std::string, double> cross_speaker;
};

// ProtocolError when the two lists do not cover the same speaker set or
// either is empty.
SimilarityReport similarity_report(const std::vector<LabeledEmbedding>& generated,
                                   const std::vector<LabeledEmbedding>& groundtruth);

void to_json(nlohmann::json& j, const SimilarityReport& r);
// speaker,same_speaker,cross_speaker
void write_similarity_csv(const std::filesystem::path& path, const SimilarityReport& r);
// enrolled_speaker,test_utterance,score,is_genuine
void write_trials_csv(const std::filesystem::path& path, const std::vector<Trial>& trials);

}  // namespace clonecraft::eval
