#include "clonecraft/data/manifest.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "clonecraft/core/error.hpp"

namespace clonecraft::data {

std::string_view split_name(Split s) { return s == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw Error(Errc::ManifestError, "unknown split: " + std::string(s));
}

namespace {

void check_field(const std::string& f, const char* what) {
  if (f.find_first_of("\t\r\n") != std::string::npos)
    throw Error(Errc::ManifestError, std::string(what) + " contains a tab or newline");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto p = line.find('\t', start);
    out.push_back(line.substr(start, p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

}  // namespace

void DatasetManifest::add(ManifestEntry e) {
  if (e.speaker_id.empty() || e.utterance_id.empty()) throw Error(Errc::ManifestError, "empty speaker or utterance id");
  check_field(e.speaker_id, "speaker_id");
  check_field(e.utterance_id, "utterance_id");
  check_field(e.audio_path, "audio_path");
  check_field(e.transcript, "transcript");
  if (!(e.duration_s > 0.0))
    throw Error(Errc::ManifestError, "non-positive duration for " + e.speaker_id + "/" + e.utterance_id);
  auto key = std::make_pair(e.speaker_id, e.utterance_id);
  if (index_.count(key)) throw Error(Errc::ManifestError, "duplicate entry " + e.speaker_id + "/" + e.utterance_id);
  index_.emplace(std::move(key), entries_.size());
  entries_.push_back(std::move(e));
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  std::filesystem::path p(e.audio_path);
  return p.is_absolute() ? p : root_ / p;
}

std::vector<std::string> DatasetManifest::speakers() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& e : entries_)
    if (seen.insert(e.speaker_id).second) out.push_back(e.speaker_id);
  return out;
}

DatasetManifest DatasetManifest::subset(Split split) const {
  DatasetManifest m(root_);
  for (const auto& e : entries_)
    if (e.split == split) m.add(e);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingAsset, "cannot open manifest " + path.string());
  DatasetManifest m(path.parent_path());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 6)
      throw Error(Errc::ManifestError, path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
    ManifestEntry e{f[0], f[1], f[2], f[3], 0.0, parse_split(f[5])};
    const auto r = std::from_chars(f[4].data(), f[4].data() + f[4].size(), e.duration_s);
    if (r.ec != std::errc{} || r.ptr != f[4].data() + f[4].size())
      throw Error(Errc::ManifestError, path.string() + ":" + std::to_string(lineno) + ": bad duration");
    m.add(std::move(e));
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write manifest " + path.string());
  out << "# speaker_id\tutterance_id\taudio_path\ttranscript\tduration_s\tsplit\n";
  char buf[64];
  for (const auto& e : manifest.entries()) {
    const auto r = std::to_chars(buf, buf + sizeof(buf), e.duration_s);
    out << e.speaker_id << '\t' << e.utterance_id << '\t' << e.audio_path << '\t' << e.transcript << '\t'
        << std::string_view(buf, r.ptr - buf) << '\t' << split_name(e.split) << '\n';
  }
}

}  // namespace clonecraft::data
