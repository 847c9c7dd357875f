#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace clonecraft::train {

enum class LrDecay { Exponential, ReduceOnPlateau, StepEveryK };

std::string_view decay_name(LrDecay d);
LrDecay parse_decay(std::string_view name);  // ConfigError on unknown names

struct TrainConfig {
  double lr_initial = 1e-3;
  LrDecay lr_decay = LrDecay::Exponential;
  // Unset means the strategy default: 0.98 (exponential), 0.5 otherwise.
  std::optional<double> gamma;
  long decay_steps = 1000;  // exponential: lr * gamma^(step / decay_steps)
  long step_k = 100000;     // step_every_k: lr * gamma^floor(step / k)
  long patience = 10;       // reduce_on_plateau, counted in evaluations
  long plateau_interval = 100;  // steps averaged into one plateau evaluation
  long max_steps = 3000;
  long checkpoint_every = 1000;
  long log_every = 1;
  std::uint64_t seed = 1;
  double grad_clip_norm = 3.0;
  double ge2e_lr_scale = 0.01;

  double effective_gamma() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Learning rate at `step`. For reduce_on_plateau, loss_history holds one
// value per evaluation; the rate is multiplied by gamma each time the number
// of evaluations without improving on the best exceeds patience.
double lr_schedule(const TrainConfig& config, long step, const std::vector<double>& loss_history);

}  // namespace clonecraft::train
