#include "clonecraft/train/synth_trainer.hpp"

#include <cmath>
#include <numeric>

#include "clonecraft/audio/waveform.hpp"
#include "clonecraft/train/encoder_trainer.hpp"

namespace clonecraft::train {

namespace {
constexpr const char* kSynthPrefix = "synth/";
}  // namespace

std::vector<SynthCorpusItem> prepare_synth_corpus(const data::DatasetManifest& manifest,
                                                  const encoder::EncoderModel& encoder) {
  std::vector<SynthCorpusItem> out;
  for (const auto& e : manifest.entries()) {
    const auto path = manifest.resolve(e);
    SynthCorpusItem item;
    item.speaker_id = e.speaker_id;
    item.utterance_id = e.utterance_id;
    item.example.text = synth::text_to_sequence(e.transcript);
    item.example.target =
        audio::compute_mel(audio::load_for_analysis(path, audio::kSynthSampleRate), audio::MelConfig::synthesizer());
    const auto enc_mel =
        audio::compute_mel(audio::load_for_analysis(path, audio::kEncoderSampleRate), audio::MelConfig::encoder());
    item.example.embedding = encoder::embed_utterance(encoder, enc_mel, audio::ShortInput::Padded, e.utterance_id).values;
    out.push_back(std::move(item));
  }
  return out;
}

SynthTrainer::SynthTrainer(synth::Synthesizer& model, const std::vector<SynthCorpusItem>& corpus,
                           TrainConfig config, std::size_t batch_size)
    : model_(model),
      corpus_(corpus),
      config_(config),
      batch_size_(batch_size),
      sampler_rng_(config.seed),
      dropout_rng_(config.seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  if (corpus_.empty()) throw Error(Errc::EmptyInput, "synthesizer corpus is empty");
  if (batch_size_ == 0) throw Error(Errc::ConfigError, "batch_size must be positive");
  adam_.add_group(model_.parameters());
}

StepMetrics SynthTrainer::step() {
  const double lr = lr_schedule(config_, step_, plateau_evaluations(losses_, config_.plateau_interval));
  // Distinct examples per batch while the corpus allows it.
  std::vector<std::size_t> idx(corpus_.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t take = std::min(batch_size_, idx.size());
  std::vector<synth::SynthExample> batch;
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(sampler_rng_)]);
    batch.push_back(corpus_[idx[i]].example);
  }

  model_.parameters().zero_grad();
  nn::Tape<float> tape;
  {
    nn::TapeScope<float> scope(tape);
    last_ = model_.teacher_forced(batch, dropout_rng_);
    tape.backward(last_.total);
  }
  std::vector<nn::ParameterSet*> sets{&model_.parameters()};
  const float norm = nn::clip_grad_norm(sets, static_cast<float>(config_.grad_clip_norm));
  adam_.step(static_cast<float>(lr));

  const double loss = last_.total.item();
  losses_.push_back(loss);
  ++step_;
  StepMetrics m;
  m.step = step_;
  m.loss = loss;
  m.lr = lr;
  m.grad_norm = norm;
  m.wallclock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  return m;
}

std::vector<StepMetrics> SynthTrainer::run(const std::filesystem::path& out_dir) {
  MetricsLog log;
  if (!out_dir.empty()) log = MetricsLog(out_dir / "metrics.jsonl", step_ > 0);
  std::vector<StepMetrics> out;
  while (step_ < config_.max_steps) {
    const StepMetrics m = step();
    out.push_back(m);
    if (m.step % config_.log_every == 0)
      log.write(m, {{"l1", last_.l1}, {"stop", last_.stop}, {"guided", last_.guided}});
    const bool last = step_ == config_.max_steps;
    if (!out_dir.empty() && ((config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0) || last))
      save_checkpoint(checkpoint(), out_dir / ("ckpt_" + std::to_string(step_) + ".ccpt"));
  }
  return out;
}

Checkpoint SynthTrainer::checkpoint() const {
  Checkpoint c;
  c.config = {{"kind", "synthesizer"},
              {"synthesizer", model_.config()},
              {"train", config_},
              {"batch_size", batch_size_}};
  c.step = step_;
  append_parameters(c, model_.parameters(), kSynthPrefix);
  c.optimizer_steps = adam_.steps_taken();
  c.optimizer_state = adam_.state();
  c.rng_states["sampler"] = rng_to_string(sampler_rng_);
  c.rng_states["dropout"] = rng_to_string(dropout_rng_);
  c.loss_history = losses_;
  return c;
}

void SynthTrainer::resume(const Checkpoint& ckpt) {
  if (ckpt.config.value("kind", "") != "synthesizer") throw Error(Errc::ConfigMismatch, "not a synthesizer checkpoint");
  if (ckpt.config.at("synthesizer").get<synth::SynthesizerConfig>() != model_.config())
    throw Error(Errc::ConfigMismatch, "checkpoint synthesizer config differs from the model");
  restore_parameters(model_.parameters(), ckpt, kSynthPrefix);
  adam_.load_state(ckpt.optimizer_state, ckpt.optimizer_steps);
  rng_from_string(sampler_rng_, ckpt.rng_states.at("sampler"));
  rng_from_string(dropout_rng_, ckpt.rng_states.at("dropout"));
  step_ = ckpt.step;
  losses_ = ckpt.loss_history;
}

SynthTrainResult train_synthesizer(synth::Synthesizer& model, const data::DatasetManifest& manifest,
                                   const std::filesystem::path& encoder_checkpoint, const TrainConfig& config,
                                   std::size_t batch_size, const std::filesystem::path& out_dir) {
  const encoder::EncoderModel encoder = load_encoder(encoder_checkpoint);
  SynthTrainResult r;
  r.encoder_hash_before = encoder.parameters().fingerprint();
  const auto corpus = prepare_synth_corpus(manifest.subset(data::Split::Train), encoder);
  SynthTrainer trainer(model, corpus, config, batch_size);
  r.metrics = trainer.run(out_dir);
  r.encoder_hash_after = encoder.parameters().fingerprint();
  if (r.encoder_hash_after != r.encoder_hash_before)
    throw Error(Errc::DependencyError, "encoder parameters changed during synthesizer training");
  return r;
}

synth::Synthesizer load_synthesizer(const Checkpoint& ckpt) {
  if (!ckpt.config.contains("synthesizer")) throw Error(Errc::ConfigMismatch, "checkpoint has no synthesizer config");
  auto model = synth::Synthesizer::build(ckpt.config.at("synthesizer").get<synth::SynthesizerConfig>(), 0);
  restore_parameters(model.parameters(), ckpt, kSynthPrefix);
  return model;
}

synth::Synthesizer load_synthesizer(const std::filesystem::path& path) {
  try {
    return load_synthesizer(load_checkpoint(path));
  } catch (const Error& e) {
    if (e.code() == Errc::MissingAsset)
      throw Error(Errc::DependencyError, "synthesizer checkpoint unavailable: " + path.string());
    throw;
  }
}

}  // namespace clonecraft::train
