#include "clonecraft/train/metrics.hpp"

#include "clonecraft/core/error.hpp"

namespace clonecraft::train {

MetricsLog::MetricsLog(const std::filesystem::path& path, bool append) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw Error(Errc::IoError, "cannot open metrics log " + path.string());
}

void MetricsLog::write(const StepMetrics& m, const nlohmann::json& extra) {
  if (!out_.is_open()) return;
  nlohmann::json j{{"step", m.step}, {"loss", m.loss}, {"lr", m.lr}, {"wallclock", m.wallclock},
                   {"grad_norm", m.grad_norm}};
  for (auto it = extra.begin(); extra.is_object() && it != extra.end(); ++it) j[it.key()] = it.value();
  out_ << j.dump() << '\n';
  out_.flush();
}

std::vector<nlohmann::json> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingAsset, "cannot open metrics log " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  return out;
}

}  // namespace clonecraft::train
