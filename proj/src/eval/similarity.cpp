#include "clonecraft/eval/similarity.hpp"

#include <fstream>
#include <set>

namespace clonecraft::eval {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
  return os;
}

}  // namespace

SimilarityReport similarity_report(const std::vector<LabeledEmbedding>& generated,
                                   const std::vector<LabeledEmbedding>& groundtruth) {
  if (generated.empty() || groundtruth.empty()) throw Error(Errc::ProtocolError, "similarity_report: empty input");
  std::set<std::string> gs, ts;
  for (const auto& [s, e] : generated) gs.insert(s);
  for (const auto& [s, e] : groundtruth) ts.insert(s);
  if (gs != ts) throw Error(Errc::ProtocolError, "similarity_report: generated and groundtruth speakers differ");

  std::map<std::string, std::pair<double, std::size_t>> same, cross;
  for (const auto& [gs_id, g] : generated) {
    for (const auto& [ts_id, t] : groundtruth) {
      auto& acc = gs_id == ts_id ? same[gs_id] : cross[gs_id];
      acc.first += encoder::cosine(g.values, t.values);
      ++acc.second;
    }
  }
  SimilarityReport r;
  for (const auto& [s, a] : same) r.same_speaker[s] = a.first / static_cast<double>(a.second);
  for (const auto& [s, a] : cross) r.cross_speaker[s] = a.first / static_cast<double>(a.second);
  return r;
}

void to_json(nlohmann::json& j, const SimilarityReport& r) {
  j = nlohmann::json{{"same_speaker", r.same_speaker}, {"cross_speaker", r.cross_speaker}};
  double sum = 0;
  for (const auto& [s, v] : r.same_speaker) sum += v;
  j["mean_same_speaker"] = sum / static_cast<double>(r.same_speaker.size());
}

void write_similarity_csv(const std::filesystem::path& path, const SimilarityReport& r) {
  auto os = open_out(path);
  os.precision(9);
  os << "speaker,same_speaker,cross_speaker\n";
  for (const auto& [s, v] : r.same_speaker) {
    os << s << ',' << v << ',';
    if (auto it = r.cross_speaker.find(s); it != r.cross_speaker.end()) os << it->second;
    os << '\n';
  }
}

void write_trials_csv(const std::filesystem::path& path, const std::vector<Trial>& trials) {
  auto os = open_out(path);
  os.precision(9);
  os << "enrolled_speaker,test_utterance,score,is_genuine\n";
  for (const auto& t : trials)
    os << t.enrolled_speaker << ',' << t.test_utterance << ',' << t.score << ',' << (t.is_genuine ? 1 : 0) << '\n';
}

}  // namespace clonecraft::eval
