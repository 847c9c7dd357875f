#pragma once

#include <chrono>
#include <filesystem>
#include <vector>

#include "clonecraft/data/sampler.hpp"
#include "clonecraft/encoder/encoder.hpp"
#include "clonecraft/ge2e/ge2e.hpp"
#include "clonecraft/train/checkpoint.hpp"
#include "clonecraft/train/metrics.hpp"
#include "clonecraft/train/schedule.hpp"

namespace clonecraft::train {

// Mean of each complete block of `interval` step losses.
std::vector<double> plateau_evaluations(const std::vector<double>& step_losses, long interval);

// GE2E optimisation of a speaker encoder over N x M speaker batches.
class EncoderTrainer {
 public:
  EncoderTrainer(encoder::EncoderModel& model, const std::vector<data::Utterance>& pool,
                 data::SpeakerBatchSpec spec, TrainConfig config);

  StepMetrics step();
  // Trains until `max_steps` total steps. With a non-empty out_dir, appends to
  // out_dir/metrics.jsonl and writes out_dir/ckpt_<step>.ccpt every
  // checkpoint_every steps and at the end.
  std::vector<StepMetrics> run(const std::filesystem::path& out_dir = {});

  Checkpoint checkpoint() const;
  void resume(const Checkpoint& ckpt);

  long current_step() const { return step_; }
  const std::vector<double>& step_losses() const { return losses_; }
  const ge2e::Ge2eParams& ge2e_params() const { return ge2e_; }
  const TrainConfig& config() const { return config_; }

 private:
  void snapshot_batch(const data::SpeakerBatch& batch, double loss) const;

  encoder::EncoderModel& model_;
  const std::vector<data::Utterance>& pool_;
  data::SpeakerBatchSpec spec_;
  TrainConfig config_;
  ge2e::Ge2eParams ge2e_;
  nn::Adam adam_;
  data::SpeakerBatchSampler sampler_;
  std::mt19937_64 dropout_rng_;
  long step_ = 0;
  std::vector<double> losses_;
  std::filesystem::path out_dir_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Convenience: featurise the manifest's train split and run.
std::vector<StepMetrics> train_encoder(encoder::EncoderModel& model, const data::DatasetManifest& manifest,
                                       const data::SpeakerBatchSpec& spec, const TrainConfig& config,
                                       const std::filesystem::path& out_dir = {});

// Rebuilds an encoder from a checkpoint written by EncoderTrainer.
encoder::EncoderModel load_encoder(const Checkpoint& ckpt);
encoder::EncoderModel load_encoder(const std::filesystem::path& path);

}  // namespace clonecraft::train
