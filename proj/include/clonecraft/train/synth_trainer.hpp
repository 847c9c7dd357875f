#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "clonecraft/data/manifest.hpp"
#include "clonecraft/encoder/encoder.hpp"
#include "clonecraft/synth/synthesizer.hpp"
#include "clonecraft/train/checkpoint.hpp"
#include "clonecraft/train/metrics.hpp"
#include "clonecraft/train/schedule.hpp"

namespace clonecraft::train {

struct SynthCorpusItem {
  std::string speaker_id;
  std::string utterance_id;
  synth::SynthExample example;
};

// Transcript tokens, synthesizer-config target mel and the frozen encoder's
// embedding of the same utterance for every manifest entry.
std::vector<SynthCorpusItem> prepare_synth_corpus(const data::DatasetManifest& manifest,
                                                  const encoder::EncoderModel& encoder);

// L1 teacher-forced optimisation over random mini-batches.
class SynthTrainer {
 public:
  SynthTrainer(synth::Synthesizer& model, const std::vector<SynthCorpusItem>& corpus, TrainConfig config,
               std::size_t batch_size = 4);

  StepMetrics step();
  // Same output layout as EncoderTrainer::run.
  std::vector<StepMetrics> run(const std::filesystem::path& out_dir = {});

  Checkpoint checkpoint() const;
  void resume(const Checkpoint& ckpt);

  long current_step() const { return step_; }
  const std::vector<double>& step_losses() const { return losses_; }
  const synth::SynthLoss& last_loss() const { return last_; }

 private:
  synth::Synthesizer& model_;
  const std::vector<SynthCorpusItem>& corpus_;
  TrainConfig config_;
  std::size_t batch_size_;
  nn::Adam adam_;
  std::mt19937_64 sampler_rng_, dropout_rng_;
  long step_ = 0;
  std::vector<double> losses_;
  synth::SynthLoss last_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct SynthTrainResult {
  std::vector<StepMetrics> metrics;
  std::uint64_t encoder_hash_before = 0;
  std::uint64_t encoder_hash_after = 0;
};

// Loads the frozen encoder (DependencyError when the checkpoint is missing),
// embeds the manifest's train split and trains. The encoder's parameter
// fingerprint is checked unchanged afterwards.
SynthTrainResult train_synthesizer(synth::Synthesizer& model, const data::DatasetManifest& manifest,
                                   const std::filesystem::path& encoder_checkpoint, const TrainConfig& config,
                                   std::size_t batch_size = 4, const std::filesystem::path& out_dir = {});

synth::Synthesizer load_synthesizer(const Checkpoint& ckpt);
synth::Synthesizer load_synthesizer(const std::filesystem::path& path);

}  // namespace clonecraft::train
