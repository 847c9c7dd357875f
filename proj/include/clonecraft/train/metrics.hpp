#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace clonecraft::train {

struct StepMetrics {
  long step = 0;
  double loss = 0;
  double lr = 0;
  double wallclock = 0;  // seconds since the loop started
  double grad_norm = 0;
};

// Line-delimited JSON, one record per logged step.
class MetricsLog {
 public:
  MetricsLog() = default;
  explicit MetricsLog(const std::filesystem::path& path, bool append = false);
  void write(const StepMetrics& m, const nlohmann::json& extra = {});
  bool open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

std::vector<nlohmann::json> read_metrics(const std::filesystem::path& path);

}  // namespace clonecraft::train
