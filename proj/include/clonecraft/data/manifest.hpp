#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace clonecraft::data {

enum class Split { Train, Test };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);

struct ManifestEntry {
  std::string speaker_id;
  std::string utterance_id;
  std::string audio_path;  // as written; relative paths resolve against the manifest directory
  std::string transcript;
  double duration_s = 0.0;
  Split split = Split::Train;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

// Tab-separated, one utterance per line:
//   speaker_id  utterance_id  audio_path  transcript  duration_s  split
// Lines starting with '#' and blank lines are ignored.
class DatasetManifest {
 public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::filesystem::path root) : root_(std::move(root)) {}

  // ManifestError on duplicate (speaker, utterance), non-positive duration or
  // fields holding tabs / newlines.
  void add(ManifestEntry e);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::filesystem::path& root() const { return root_; }
  void set_root(std::filesystem::path root) { root_ = std::move(root); }

  std::filesystem::path resolve(const ManifestEntry& e) const;
  // Speaker ids in order of first appearance.
  std::vector<std::string> speakers() const;
  DatasetManifest subset(Split split) const;

  friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) { return a.entries_ == b.entries_; }

 private:
  std::filesystem::path root_;
  std::vector<ManifestEntry> entries_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
};

DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace clonecraft::data
