#include "clonecraft/train/encoder_trainer.hpp"

#include <cmath>
#include <fstream>

#include "clonecraft/audio/melf.hpp"

namespace clonecraft::train {

namespace {
constexpr const char* kEncoderPrefix = "encoder/";
constexpr const char* kLossPrefix = "loss/";
}  // namespace

std::vector<double> plateau_evaluations(const std::vector<double>& step_losses, long interval) {
  std::vector<double> out;
  const std::size_t n = static_cast<std::size_t>(interval);
  for (std::size_t start = 0; start + n <= step_losses.size(); start += n) {
    double s = 0;
    for (std::size_t i = start; i < start + n; ++i) s += step_losses[i];
    out.push_back(s / static_cast<double>(n));
  }
  return out;
}

EncoderTrainer::EncoderTrainer(encoder::EncoderModel& model, const std::vector<data::Utterance>& pool,
                               data::SpeakerBatchSpec spec, TrainConfig config)
    : model_(model),
      pool_(pool),
      spec_(spec),
      config_(config),
      sampler_(pool, spec, config.seed),
      dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  adam_.add_group(model_.parameters());
  adam_.add_group(ge2e_.parameters(), static_cast<float>(config_.ge2e_lr_scale));
}

StepMetrics EncoderTrainer::step() {
  const data::SpeakerBatch batch = sampler_.next();
  const double lr = lr_schedule(config_, step_, plateau_evaluations(losses_, config_.plateau_interval));

  model_.parameters().zero_grad();
  ge2e_.parameters().zero_grad();
  std::vector<const MatrixF*> windows;
  for (const auto& w : batch.windows) windows.push_back(&w.frames);

  nn::Tape<float> tape;
  double loss_value = 0;
  {
    nn::TapeScope<float> scope(tape);
    nn::VarF e = model_.forward(windows, &dropout_rng_);
    nn::VarF loss = ge2e::ge2e_total(e, spec_.n_speakers, spec_.m_utterances, ge2e_.w(), ge2e_.b());
    loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      snapshot_batch(batch, loss_value);
      throw Error(Errc::NumericalError, "non-finite GE2E loss at step " + std::to_string(step_));
    }
    tape.backward(loss);
  }
  std::vector<nn::ParameterSet*> sets{&model_.parameters(), &ge2e_.parameters()};
  const float norm = nn::clip_grad_norm(sets, static_cast<float>(config_.grad_clip_norm));
  adam_.step(static_cast<float>(lr));
  ge2e_.clamp();

  losses_.push_back(loss_value);
  ++step_;
  StepMetrics m;
  m.step = step_;
  m.loss = loss_value;
  m.lr = lr;
  m.grad_norm = norm;
  m.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return m;
}

std::vector<StepMetrics> EncoderTrainer::run(const std::filesystem::path& out_dir) {
  out_dir_ = out_dir;
  MetricsLog log;
  if (!out_dir.empty()) log = MetricsLog(out_dir / "metrics.jsonl", step_ > 0);
  std::vector<StepMetrics> out;
  while (step_ < config_.max_steps) {
    const StepMetrics m = step();
    out.push_back(m);
    if (m.step % config_.log_every == 0)
      log.write(m, {{"w", ge2e_.w().item()}, {"b", ge2e_.b().item()}});
    const bool last = step_ == config_.max_steps;
    if (!out_dir.empty() && ((config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0) || last))
      save_checkpoint(checkpoint(), out_dir / ("ckpt_" + std::to_string(step_) + ".ccpt"));
  }
  return out;
}

Checkpoint EncoderTrainer::checkpoint() const {
  Checkpoint c;
  c.config = {{"kind", "encoder"},
              {"encoder", model_.config()},
              {"train", config_},
              {"batch", {{"n_speakers", spec_.n_speakers}, {"m_utterances", spec_.m_utterances}}}};
  c.step = step_;
  append_parameters(c, model_.parameters(), kEncoderPrefix);
  append_parameters(c, ge2e_.parameters(), kLossPrefix);
  c.optimizer_steps = adam_.steps_taken();
  c.optimizer_state = adam_.state();
  c.rng_states["sampler"] = rng_to_string(sampler_.rng());
  c.rng_states["dropout"] = rng_to_string(dropout_rng_);
  c.loss_history = losses_;
  return c;
}

void EncoderTrainer::resume(const Checkpoint& ckpt) {
  if (ckpt.config.value("kind", "") != "encoder") throw Error(Errc::ConfigMismatch, "not an encoder checkpoint");
  if (ckpt.config.at("encoder").get<encoder::EncoderConfig>() != model_.config())
    throw Error(Errc::ConfigMismatch, "checkpoint encoder config differs from the model");
  restore_parameters(model_.parameters(), ckpt, kEncoderPrefix);
  restore_parameters(ge2e_.parameters(), ckpt, kLossPrefix);
  adam_.load_state(ckpt.optimizer_state, ckpt.optimizer_steps);
  rng_from_string(sampler_.rng(), ckpt.rng_states.at("sampler"));
  rng_from_string(dropout_rng_, ckpt.rng_states.at("dropout"));
  step_ = ckpt.step;
  losses_ = ckpt.loss_history;
}

void EncoderTrainer::snapshot_batch(const data::SpeakerBatch& batch, double loss) const {
  if (out_dir_.empty()) return;
  const auto dir = out_dir_ / ("nonfinite_step_" + std::to_string(step_));
  std::filesystem::create_directories(dir);
  nlohmann::json j{{"step", step_}, {"loss", std::to_string(loss)}, {"speakers", batch.speakers}};
  for (std::size_t i = 0; i < batch.windows.size(); ++i) {
    const auto& w = batch.windows[i];
    j["windows"].push_back({{"utterance", w.source_utterance_id}, {"start_frame", w.start_frame}});
    audio::write_melf(dir / ("window_" + std::to_string(i) + ".melf"),
                      audio::MelSpectrogram{w.frames, audio::MelConfig::encoder()});
  }
  std::ofstream(dir / "batch.json") << j.dump(2) << '\n';
}

std::vector<StepMetrics> train_encoder(encoder::EncoderModel& model, const data::DatasetManifest& manifest,
                                       const data::SpeakerBatchSpec& spec, const TrainConfig& config,
                                       const std::filesystem::path& out_dir) {
  const auto pool = data::load_encoder_features(manifest.subset(data::Split::Train));
  EncoderTrainer trainer(model, pool, spec, config);
  return trainer.run(out_dir);
}

encoder::EncoderModel load_encoder(const Checkpoint& ckpt) {
  if (!ckpt.config.contains("encoder")) throw Error(Errc::ConfigMismatch, "checkpoint has no encoder config");
  auto model = encoder::build_encoder(ckpt.config.at("encoder").get<encoder::EncoderConfig>(), 0);
  restore_parameters(model.parameters(), ckpt, kEncoderPrefix);
  return model;
}

encoder::EncoderModel load_encoder(const std::filesystem::path& path) {
  try {
    return load_encoder(load_checkpoint(path));
  } catch (const Error& e) {
    if (e.code() == Errc::MissingAsset) throw Error(Errc::DependencyError, "encoder checkpoint unavailable: " + path.string());
    throw;
  }
}

}  // namespace clonecraft::train
