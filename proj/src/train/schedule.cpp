#include "clonecraft/train/schedule.hpp"

#include <cmath>

#include "clonecraft/core/error.hpp"

namespace clonecraft::train {

std::string_view decay_name(LrDecay d) {
  switch (d) {
    case LrDecay::Exponential: return "exponential";
    case LrDecay::ReduceOnPlateau: return "reduce_on_plateau";
    case LrDecay::StepEveryK: return "step_every_k";
  }
  return "exponential";
}

LrDecay parse_decay(std::string_view name) {
  for (auto d : {LrDecay::Exponential, LrDecay::ReduceOnPlateau, LrDecay::StepEveryK})
    if (decay_name(d) == name) return d;
  throw Error(Errc::ConfigError, "unknown lr_decay: " + std::string(name));
}

double TrainConfig::effective_gamma() const {
  if (gamma) return *gamma;
  return lr_decay == LrDecay::Exponential ? 0.98 : 0.5;
}

void TrainConfig::validate() const {
  if (!(lr_initial > 0)) throw Error(Errc::ConfigError, "lr_initial must be positive");
  const double g = effective_gamma();
  if (!(g > 0 && g <= 1)) throw Error(Errc::ConfigError, "gamma must be in (0, 1]");
  if (decay_steps <= 0 || step_k <= 0 || plateau_interval <= 0)
    throw Error(Errc::ConfigError, "decay_steps, step_k and plateau_interval must be positive");
  if (patience < 0) throw Error(Errc::ConfigError, "patience must be non-negative");
  if (max_steps < 0 || checkpoint_every < 0 || log_every <= 0)
    throw Error(Errc::ConfigError, "step counts must be non-negative (log_every positive)");
  if (!(grad_clip_norm > 0)) throw Error(Errc::ConfigError, "grad_clip_norm must be positive");
  if (!(ge2e_lr_scale > 0)) throw Error(Errc::ConfigError, "ge2e_lr_scale must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr_initial", c.lr_initial},
                     {"lr_decay", std::string(decay_name(c.lr_decay))},
                     {"gamma", c.effective_gamma()},
                     {"decay_steps", c.decay_steps},
                     {"step_k", c.step_k},
                     {"patience", c.patience},
                     {"plateau_interval", c.plateau_interval},
                     {"max_steps", c.max_steps},
                     {"checkpoint_every", c.checkpoint_every},
                     {"log_every", c.log_every},
                     {"seed", c.seed},
                     {"grad_clip_norm", c.grad_clip_norm},
                     {"ge2e_lr_scale", c.ge2e_lr_scale}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.lr_initial = j.value("lr_initial", d.lr_initial);
  c.lr_decay = parse_decay(j.value("lr_decay", std::string(decay_name(d.lr_decay))));
  c.gamma = j.contains("gamma") && !j.at("gamma").is_null() ? std::optional<double>(j.at("gamma").get<double>())
                                                             : std::nullopt;
  c.decay_steps = j.value("decay_steps", d.decay_steps);
  c.step_k = j.value("step_k", d.step_k);
  c.patience = j.value("patience", d.patience);
  c.plateau_interval = j.value("plateau_interval", d.plateau_interval);
  c.max_steps = j.value("max_steps", d.max_steps);
  c.checkpoint_every = j.value("checkpoint_every", d.checkpoint_every);
  c.log_every = j.value("log_every", d.log_every);
  c.seed = j.value("seed", d.seed);
  c.grad_clip_norm = j.value("grad_clip_norm", d.grad_clip_norm);
  c.ge2e_lr_scale = j.value("ge2e_lr_scale", d.ge2e_lr_scale);
}

double lr_schedule(const TrainConfig& config, long step, const std::vector<double>& loss_history) {
  const double lr = config.lr_initial;
  const double g = config.effective_gamma();
  switch (config.lr_decay) {
    case LrDecay::Exponential:
      return lr * std::pow(g, static_cast<double>(step) / static_cast<double>(config.decay_steps));
    case LrDecay::StepEveryK:
      return lr * std::pow(g, static_cast<double>(step / config.step_k));
    case LrDecay::ReduceOnPlateau: {
      double cur = lr;
      double best = std::numeric_limits<double>::infinity();
      long bad = 0;
      for (double loss : loss_history) {
        if (loss < best) {
          best = loss;
          bad = 0;
        } else if (++bad > config.patience) {
          cur *= g;
          bad = 0;
        }
      }
      return cur;
    }
  }
  return lr;
}

}  // namespace clonecraft::train
