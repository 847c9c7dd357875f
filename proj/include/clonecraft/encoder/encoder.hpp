#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clonecraft/audio/partials.hpp"
#include "clonecraft/nn/params.hpp"

namespace clonecraft::encoder {

enum class Architecture { RecConv, RecConv2, Gru, AdvancedGru, Lstm };

std::string_view architecture_name(Architecture a);
// ConfigError on unknown names.
Architecture parse_architecture(std::string_view name);

struct EncoderConfig {
  Architecture architecture = Architecture::AdvancedGru;
  std::size_t recurrent_units = 512;  // also the conv channel count
  std::size_t projection_dim = 256;
  std::size_t embedding_dim = 256;
  float dropout = 0.2f;
  std::size_t input_mels = 40;
  std::size_t conv_kernel = 5;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);

enum class LayerKind { Conv, Gru, Lstm, Projection };

struct Layer {
  LayerKind kind;
  nn::Conv1d conv;
  nn::GruLayer gru;
  nn::LstmLayer lstm;
  nn::Linear proj;
};

class EncoderModel {
 public:
  const EncoderConfig& config() const { return config_; }
  nn::ParameterSet& parameters() { return params_; }
  const nn::ParameterSet& parameters() const { return params_; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Batched forward over equal-length windows, each [T, input_mels].
  // Returns [B, embedding_dim] with unit-norm rows. Dropout is applied only
  // when rng is non-null.
  nn::VarF forward(const std::vector<const MatrixF*>& windows, std::mt19937_64* rng = nullptr) const;

 private:
  friend EncoderModel build_encoder(const EncoderConfig& config, std::uint64_t seed);
  EncoderConfig config_;
  nn::ParameterSet params_;
  std::vector<Layer> layers_;
  nn::Linear final_;
};

EncoderModel build_encoder(const EncoderConfig& config, std::uint64_t seed);

struct EmbeddingVector {
  std::vector<float> values;
  std::string source;
};

struct SpeakerEmbedding {
  std::vector<float> values;
  std::string speaker_id;
  std::size_t n_utterances = 0;
};

// train_mode draws dropout masks from rng (required when train_mode is set).
EmbeddingVector forward_window(const EncoderModel& model, const audio::PartialWindow& window,
                               bool train_mode = false, std::mt19937_64* rng = nullptr);

EmbeddingVector embed_utterance(const EncoderModel& model, const audio::MelSpectrogram& mel,
                                audio::ShortInput mode = audio::ShortInput::Padded,
                                const std::string& utterance_id = {});

// Element-wise mean followed by L2 normalisation; a single member is
// returned unchanged.
std::vector<float> average_normalized(const std::vector<std::vector<float>>& members);

// Plain mean, not re-normalised. EmptyInput on an empty list.
SpeakerEmbedding speaker_embedding(const std::vector<EmbeddingVector>& embeddings,
                                   const std::string& speaker_id = {});

double cosine(const std::vector<float>& a, const std::vector<float>& b);

// "DVEC" | u16 dim | dim x f32, little-endian.
void write_dvec(const std::filesystem::path& path, const std::vector<float>& values);
std::vector<float> read_dvec(const std::filesystem::path& path);

}  // namespace clonecraft::encoder
