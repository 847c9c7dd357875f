#pragma once

#include <cstdint>
#include <string>
#include <random>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clonecraft/audio/mel.hpp"
#include "clonecraft/encoder/encoder.hpp"
#include "clonecraft/nn/params.hpp"
#include "clonecraft/synth/text.hpp"

namespace clonecraft::synth {

enum class Conditioning { DirectConcat, LinearThenConcat };

std::string_view conditioning_name(Conditioning c);
Conditioning parse_conditioning(std::string_view name);

struct SynthesizerConfig {
  std::size_t char_embedding_dim = 512;
  std::size_t encoder_dim = 256;  // BiGRU output width D (two halves)
  std::size_t encoder_conv_kernel = 5;
  Conditioning embedding_conditioning = Conditioning::LinearThenConcat;
  std::size_t speaker_embedding_dim = 256;
  std::size_t conditioning_proj_dim = 256;  // linear_then_concat only
  std::size_t prenet_dim = 256;
  std::size_t attention_dim = 128;
  std::size_t location_kernel = 31;
  std::size_t attention_rnn_dim = 512;
  std::size_t decoder_dim = 512;
  std::size_t n_mels = 80;
  std::size_t reduction_factor = 2;
  std::size_t max_decoder_steps = 500;
  float prenet_dropout = 0.5f;
  float stop_weight = 1.0f;
  // Diagonal prior on the alignment: penalty weight and band width.
  float guided_attention_weight = 1.0f;
  float guided_attention_sigma = 0.2f;
  float log_floor = -12.0f;

  // Small widths for single-core runs; same structure.
  static SynthesizerConfig desk();

  // Width of the conditioned encoder states: D + 256 or D + proj.
  std::size_t conditioned_dim() const;
  void validate() const;
  friend bool operator==(const SynthesizerConfig&, const SynthesizerConfig&) = default;
};

void to_json(nlohmann::json& j, const SynthesizerConfig& c);
void from_json(const nlohmann::json& j, SynthesizerConfig& c);

// One training / inference example.
struct SynthExample {
  TextSequence text;
  std::vector<float> embedding;
  audio::MelSpectrogram target;  // synthesizer config; unused for inference
};

struct SynthOutput {
  MatrixF mel_pred;                // [T_out, n_mels], normalised units
  std::vector<float> stop_logits;  // one per decoder step
  MatrixF alignment;               // [steps, T_enc]
  bool non_converged_stop = false;
};

struct SynthLoss {
  nn::VarF total;
  double l1 = 0;
  double stop = 0;
  double guided = 0;
  std::vector<SynthOutput> outputs;
};

// Mean absolute difference; ShapeError on mismatch.
nn::VarF synth_loss(const nn::VarF& pred, const nn::VarF& target);

// (log-mel - floor) / |floor|, so the floor maps to 0 and 0 dB to 1.
MatrixF normalize_mel(const MatrixF& log_mel, float log_floor);
MatrixF denormalize_mel(const MatrixF& norm, float log_floor);

class Synthesizer {
 public:
  static Synthesizer build(const SynthesizerConfig& config, std::uint64_t seed);

  const SynthesizerConfig& config() const { return config_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }

  // Encoder states for a batch of token sequences, padded to the longest:
  // batch-major rows b * T_max + t. EmptyInput on an empty sequence.
  nn::VarF encode_text(const std::vector<TextSequence>& texts) const;
  // Single sequence: [L, D].
  MatrixF encode_text(const TextSequence& text) const;

  // Appends each sequence's (projected) embedding to each of its T_max rows.
  // ConfigMismatch when an embedding has the wrong width.
  nn::VarF condition(const nn::VarF& states, std::size_t t_max,
                     const std::vector<std::vector<float>>& embeddings) const;

  // Teacher-forced pass plus masked L1 + weighted stop BCE. Dropout masks
  // come from rng (prenet dropout is also active at inference).
  SynthLoss teacher_forced(const std::vector<SynthExample>& batch, std::mt19937_64& rng) const;

  // Autoregressive decoding until stop probability > 0.5 or the step cap.
  SynthOutput infer(const TextSequence& text, const std::vector<float>& embedding, std::uint64_t seed) const;
  // infer() with frames mapped back to log-mel in the synthesizer config.
  audio::MelSpectrogram infer_mel(const TextSequence& text, const std::vector<float>& embedding,
                                  std::uint64_t seed, bool* non_converged = nullptr) const;

 private:
  struct Decoded {
    std::vector<nn::VarF> mel_steps;   // [B, r * n_mels] per step
    std::vector<nn::VarF> stop_steps;  // [B, 1] per step
    std::vector<nn::VarF> align_steps;  // [B, T_max] per step
  };
  // teacher: per-step previous frame [B, n_mels]; when empty, decodes
  // autoregressively for a single sequence until the stop token fires.
  Decoded decode(const nn::VarF& memory, const std::vector<std::size_t>& lengths, std::size_t t_max,
                 const std::vector<MatrixF>& teacher, std::mt19937_64& rng) const;

  SynthesizerConfig config_;
  nn::ParameterSet params_;
  nn::VarF char_embedding_;
  nn::Conv1d enc_conv_;
  nn::GruLayer enc_fwd_, enc_bwd_;
  nn::Linear cond_proj_;
  nn::Linear prenet1_, prenet2_;
  nn::Linear att_memory_, att_query_, att_location_;
  nn::VarF att_v_;
  nn::GruLayer att_rnn_, dec_rnn_;
  nn::Linear mel_out_, stop_out_;
};

}  // namespace clonecraft::synth
