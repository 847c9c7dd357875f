#include "clonecraft/encoder/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace clonecraft::encoder {
namespace {

constexpr std::pair<Architecture, std::string_view> kNames[] = {
    {Architecture::RecConv, "rec_conv"},
    {Architecture::RecConv2, "rec_conv_2"},
    {Architecture::Gru, "gru"},
    {Architecture::AdvancedGru, "advanced_gru"},
    {Architecture::Lstm, "lstm"},
};

struct Plan {
  int convs;
  int recurrent;
  bool lstm;
  bool projections;
};

Plan plan_for(Architecture a) {
  switch (a) {
    case Architecture::RecConv: return {5, 1, false, false};
    case Architecture::RecConv2: return {3, 2, false, true};
    case Architecture::Gru: return {0, 3, false, true};
    case Architecture::AdvancedGru: return {1, 3, false, true};
    case Architecture::Lstm: return {1, 3, true, true};
  }
  throw Error(Errc::ConfigError, "unknown encoder architecture");
}

}  // namespace

std::string_view architecture_name(Architecture a) {
  for (const auto& [k, name] : kNames)
    if (k == a) return name;
  throw Error(Errc::ConfigError, "unknown encoder architecture");
}

Architecture parse_architecture(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw Error(Errc::ConfigError, "unknown encoder architecture: " + std::string(name));
}

void EncoderConfig::validate() const {
  plan_for(architecture);
  if (recurrent_units == 0 || projection_dim == 0 || embedding_dim == 0 || input_mels == 0)
    throw Error(Errc::ConfigError, "encoder dimensions must be positive");
  if (conv_kernel == 0 || conv_kernel % 2 == 0) throw Error(Errc::ConfigError, "conv_kernel must be odd");
  if (!(dropout >= 0.0f && dropout < 1.0f)) throw Error(Errc::ConfigError, "dropout must be in [0, 1)");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = nlohmann::json{{"architecture", std::string(architecture_name(c.architecture))},
                     {"recurrent_units", c.recurrent_units},
                     {"projection_dim", c.projection_dim},
                     {"embedding_dim", c.embedding_dim},
                     {"dropout", c.dropout},
                     {"input_mels", c.input_mels},
                     {"conv_kernel", c.conv_kernel}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  EncoderConfig d;
  c.architecture = parse_architecture(j.value("architecture", std::string(architecture_name(d.architecture))));
  c.recurrent_units = j.value("recurrent_units", d.recurrent_units);
  c.projection_dim = j.value("projection_dim", d.projection_dim);
  c.embedding_dim = j.value("embedding_dim", d.embedding_dim);
  c.dropout = j.value("dropout", d.dropout);
  c.input_mels = j.value("input_mels", d.input_mels);
  c.conv_kernel = j.value("conv_kernel", d.conv_kernel);
}

EncoderModel build_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  const Plan plan = plan_for(config.architecture);
  EncoderModel m;
  m.config_ = config;
  std::mt19937_64 rng(seed);
  std::size_t width = config.input_mels;
  const std::size_t U = config.recurrent_units;
  for (int i = 0; i < plan.convs; ++i) {
    Layer l{LayerKind::Conv, {}, {}, {}, {}};
    l.conv = nn::Conv1d::make(m.params_, "conv" + std::to_string(i), width, U, config.conv_kernel, rng);
    m.layers_.push_back(std::move(l));
    width = U;
  }
  for (int i = 0; i < plan.recurrent; ++i) {
    const std::string idx = std::to_string(i);
    Layer l{plan.lstm ? LayerKind::Lstm : LayerKind::Gru, {}, {}, {}, {}};
    if (plan.lstm)
      l.lstm = nn::LstmLayer::make(m.params_, "lstm" + idx, width, U, rng);
    else
      l.gru = nn::GruLayer::make(m.params_, "gru" + idx, width, U, rng);
    m.layers_.push_back(std::move(l));
    width = U;
    if (plan.projections) {
      Layer p{LayerKind::Projection, {}, {}, {}, {}};
      p.proj = nn::Linear::make(m.params_, "proj" + idx, width, config.projection_dim, rng);
      m.layers_.push_back(std::move(p));
      width = config.projection_dim;
    }
  }
  m.final_ = nn::Linear::make(m.params_, "final", width, config.embedding_dim, rng);
  return m;
}

nn::VarF EncoderModel::forward(const std::vector<const MatrixF*>& windows, std::mt19937_64* rng) const {
  if (windows.empty()) throw Error(Errc::EmptyInput, "encoder forward: no windows");
  const std::size_t B = windows.size();
  const std::size_t T = windows.front()->rows();
  if (T == 0) throw Error(Errc::EmptyInput, "encoder forward: zero-length window");
  MatrixF x(T * B, config_.input_mels);
  for (std::size_t b = 0; b < B; ++b) {
    const MatrixF& w = *windows[b];
    if (w.rows() != T || w.cols() != config_.input_mels)
      throw Error(Errc::ShapeError, "encoder forward: windows must share shape [T, input_mels]");
    for (std::size_t t = 0; t < T; ++t) std::memcpy(&x(t * B + b, 0), w.row(t).data(), w.cols() * sizeof(float));
  }
  // Fixed affine map of the log-mel range [-12, 0] onto [-1, 1].
  for (float& v : x.storage()) v = (v + 6.0f) / 6.0f;

  nn::VarF h = nn::VarF::constant(std::move(x));
  for (const Layer& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv: h = nn::relu(l.conv(h, T, B, true)); break;
      case LayerKind::Gru: h = l.gru(h, T, B); break;
      case LayerKind::Lstm: h = l.lstm(h, T, B); break;
      case LayerKind::Projection: h = l.proj(h); break;
    }
    if (rng) h = nn::dropout(h, config_.dropout, *rng);
  }
  nn::VarF last = nn::slice_rows(h, (T - 1) * B, T * B);
  nn::VarF out = final_(last);
  for (float v : out.value().storage())
    if (!std::isfinite(v)) throw Error(Errc::NumericalError, "encoder forward: non-finite activation");
  return nn::row_normalize(out);
}

EmbeddingVector forward_window(const EncoderModel& model, const audio::PartialWindow& window, bool train_mode,
                               std::mt19937_64* rng) {
  if (train_mode && !rng) throw Error(Errc::ConfigError, "forward_window: train_mode needs an rng");
  const nn::VarF e = model.forward({&window.frames}, train_mode ? rng : nullptr);
  EmbeddingVector out;
  out.values = e.value().storage();
  out.source = window.source_utterance_id.empty()
                   ? std::string{}
                   : window.source_utterance_id + "@" + std::to_string(window.start_frame);
  return out;
}

std::vector<float> average_normalized(const std::vector<std::vector<float>>& members) {
  if (members.empty()) throw Error(Errc::EmptyInput, "average of zero embeddings");
  if (members.size() == 1) return members.front();
  const std::size_t D = members.front().size();
  std::vector<double> acc(D, 0.0);
  for (const auto& m : members) {
    if (m.size() != D) throw Error(Errc::ShapeError, "embedding dimensions differ");
    for (std::size_t d = 0; d < D; ++d) acc[d] += m[d];
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 1e-12)) throw Error(Errc::NumericalError, "window embeddings cancel to zero");
  std::vector<float> out(D);
  for (std::size_t d = 0; d < D; ++d) out[d] = static_cast<float>(acc[d] / norm);
  return out;
}

EmbeddingVector embed_utterance(const EncoderModel& model, const audio::MelSpectrogram& mel,
                                audio::ShortInput mode, const std::string& utterance_id) {
  if (mel.n_mels() != model.config().input_mels)
    throw Error(Errc::ConfigMismatch, "embed_utterance: mel channel count differs from the encoder input");
  const auto windows = audio::slice_partials(mel, audio::kPartialFrames, 0.5, mode, utterance_id);
  std::vector<const MatrixF*> ptrs;
  for (const auto& w : windows) ptrs.push_back(&w.frames);
  const nn::VarF e = model.forward(ptrs);
  std::vector<std::vector<float>> rows;
  for (std::size_t i = 0; i < e.rows(); ++i) {
    const auto r = e.value().row(i);
    rows.emplace_back(r.begin(), r.end());
  }
  return {average_normalized(rows), utterance_id};
}

SpeakerEmbedding speaker_embedding(const std::vector<EmbeddingVector>& embeddings, const std::string& speaker_id) {
  if (embeddings.empty()) throw Error(Errc::EmptyInput, "speaker_embedding: no utterance embeddings");
  const std::size_t D = embeddings.front().values.size();
  std::vector<double> acc(D, 0.0);
  for (const auto& e : embeddings) {
    if (e.values.size() != D) throw Error(Errc::ShapeError, "embedding dimensions differ");
    for (std::size_t d = 0; d < D; ++d) acc[d] += e.values[d];
  }
  SpeakerEmbedding s;
  s.speaker_id = speaker_id;
  s.n_utterances = embeddings.size();
  s.values.resize(D);
  for (std::size_t d = 0; d < D; ++d) s.values[d] = static_cast<float>(acc[d] / static_cast<double>(embeddings.size()));
  return s;
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty()) throw Error(Errc::ShapeError, "cosine: dimension mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += double(a[i]) * b[i];
    aa += double(a[i]) * a[i];
    bb += double(b[i]) * b[i];
  }
  if (!(aa > 0 && bb > 0)) throw Error(Errc::NumericalError, "cosine of a zero vector");
  return ab / std::sqrt(aa * bb);
}

void write_dvec(const std::filesystem::path& path, const std::vector<float>& values) {
  if (values.size() > 0xFFFF) throw Error(Errc::FormatError, "DVEC dimension exceeds u16");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  const std::uint16_t dim = static_cast<std::uint16_t>(values.size());
  out.write("DVEC", 4);
  out.write(reinterpret_cast<const char*>(&dim), 2);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 4));
}

std::vector<float> read_dvec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingAsset, "cannot open " + path.string());
  char magic[4];
  std::uint16_t dim = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, "DVEC", 4) != 0) throw Error(Errc::FormatError, "bad DVEC magic");
  if (!in.read(reinterpret_cast<char*>(&dim), 2)) throw Error(Errc::FormatError, "truncated DVEC header");
  std::vector<float> v(dim);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim) * 4))
    throw Error(Errc::FormatError, "truncated DVEC payload");
  return v;
}

}  // namespace clonecraft::encoder
