#include "clonecraft/synth/synthesizer.hpp"

#include <algorithm>
#include <cmath>

#include "clonecraft/nn/rnn_ops.hpp"

namespace clonecraft::synth {

using nn::VarF;

namespace {

constexpr std::pair<Conditioning, std::string_view> kModes[] = {
    {Conditioning::DirectConcat, "direct_concat"},
    {Conditioning::LinearThenConcat, "linear_then_concat"},
};

constexpr float kMaskValue = -1e9f;

bool all_finite(const MatrixF& m) {
  return std::all_of(m.storage().begin(), m.storage().end(), [](float v) { return std::isfinite(v); });
}

VarF gru_step(const nn::GruLayer& g, const VarF& x, const VarF& h) {
  return nn::gru_cell(nn::affine(x, g.w_ih, g.b_ih), h, g.w_hh, g.b_hh);
}

}  // namespace

std::string_view conditioning_name(Conditioning c) {
  for (const auto& [k, n] : kModes)
    if (k == c) return n;
  throw Error(Errc::ConfigError, "unknown conditioning mode");
}

Conditioning parse_conditioning(std::string_view name) {
  for (const auto& [k, n] : kModes)
    if (n == name) return k;
  throw Error(Errc::ConfigError, "unknown conditioning mode: " + std::string(name));
}

SynthesizerConfig SynthesizerConfig::desk() {
  SynthesizerConfig c;
  c.char_embedding_dim = 64;
  c.encoder_dim = 64;
  c.prenet_dim = 64;
  c.attention_dim = 64;
  c.location_kernel = 15;
  c.attention_rnn_dim = 128;
  c.decoder_dim = 128;
  c.max_decoder_steps = 300;
  return c;
}

std::size_t SynthesizerConfig::conditioned_dim() const {
  return encoder_dim + (embedding_conditioning == Conditioning::DirectConcat ? speaker_embedding_dim
                                                                             : conditioning_proj_dim);
}

void SynthesizerConfig::validate() const {
  if (char_embedding_dim == 0 || encoder_dim == 0 || speaker_embedding_dim == 0 || conditioning_proj_dim == 0 ||
      prenet_dim == 0 || attention_dim == 0 || attention_rnn_dim == 0 || decoder_dim == 0 || n_mels == 0)
    throw Error(Errc::ConfigError, "synthesizer dimensions must be positive");
  if (encoder_dim % 2 != 0) throw Error(Errc::ConfigError, "encoder_dim must be even (two GRU directions)");
  if (encoder_conv_kernel % 2 == 0 || location_kernel % 2 == 0)
    throw Error(Errc::ConfigError, "kernel widths must be odd");
  if (reduction_factor == 0 || max_decoder_steps == 0)
    throw Error(Errc::ConfigError, "reduction_factor and max_decoder_steps must be positive");
  if (!(prenet_dropout >= 0.0f && prenet_dropout < 1.0f))
    throw Error(Errc::ConfigError, "prenet_dropout must be in [0, 1)");
  if (!(stop_weight >= 0.0f) || !(guided_attention_weight >= 0.0f))
    throw Error(Errc::ConfigError, "loss weights must be non-negative");
  if (!(guided_attention_sigma > 0.0f)) throw Error(Errc::ConfigError, "guided_attention_sigma must be positive");
  if (!(log_floor < 0.0f)) throw Error(Errc::ConfigError, "log_floor must be negative");
}

void to_json(nlohmann::json& j, const SynthesizerConfig& c) {
  j = nlohmann::json{{"char_embedding_dim", c.char_embedding_dim},
                     {"encoder_dim", c.encoder_dim},
                     {"encoder_conv_kernel", c.encoder_conv_kernel},
                     {"embedding_conditioning", std::string(conditioning_name(c.embedding_conditioning))},
                     {"speaker_embedding_dim", c.speaker_embedding_dim},
                     {"conditioning_proj_dim", c.conditioning_proj_dim},
                     {"prenet_dim", c.prenet_dim},
                     {"attention_dim", c.attention_dim},
                     {"location_kernel", c.location_kernel},
                     {"attention_rnn_dim", c.attention_rnn_dim},
                     {"decoder_dim", c.decoder_dim},
                     {"n_mels", c.n_mels},
                     {"reduction_factor", c.reduction_factor},
                     {"max_decoder_steps", c.max_decoder_steps},
                     {"prenet_dropout", c.prenet_dropout},
                     {"stop_weight", c.stop_weight},
                     {"guided_attention_weight", c.guided_attention_weight},
                     {"guided_attention_sigma", c.guided_attention_sigma},
                     {"log_floor", c.log_floor}};
}

void from_json(const nlohmann::json& j, SynthesizerConfig& c) {
  const SynthesizerConfig d = c;
  c.char_embedding_dim = j.value("char_embedding_dim", d.char_embedding_dim);
  c.encoder_dim = j.value("encoder_dim", d.encoder_dim);
  c.encoder_conv_kernel = j.value("encoder_conv_kernel", d.encoder_conv_kernel);
  c.embedding_conditioning = parse_conditioning(
      j.value("embedding_conditioning", std::string(conditioning_name(d.embedding_conditioning))));
  c.speaker_embedding_dim = j.value("speaker_embedding_dim", d.speaker_embedding_dim);
  c.conditioning_proj_dim = j.value("conditioning_proj_dim", d.conditioning_proj_dim);
  c.prenet_dim = j.value("prenet_dim", d.prenet_dim);
  c.attention_dim = j.value("attention_dim", d.attention_dim);
  c.location_kernel = j.value("location_kernel", d.location_kernel);
  c.attention_rnn_dim = j.value("attention_rnn_dim", d.attention_rnn_dim);
  c.decoder_dim = j.value("decoder_dim", d.decoder_dim);
  c.n_mels = j.value("n_mels", d.n_mels);
  c.reduction_factor = j.value("reduction_factor", d.reduction_factor);
  c.max_decoder_steps = j.value("max_decoder_steps", d.max_decoder_steps);
  c.prenet_dropout = j.value("prenet_dropout", d.prenet_dropout);
  c.stop_weight = j.value("stop_weight", d.stop_weight);
  c.guided_attention_weight = j.value("guided_attention_weight", d.guided_attention_weight);
  c.guided_attention_sigma = j.value("guided_attention_sigma", d.guided_attention_sigma);
  c.log_floor = j.value("log_floor", d.log_floor);
}

VarF synth_loss(const VarF& pred, const VarF& target) {
  if (!pred.value().same_shape(target.value()))
    throw Error(Errc::ShapeError, "synth_loss: prediction and target shapes differ");
  return nn::mean_all(nn::abs(nn::sub(pred, target)));
}

MatrixF normalize_mel(const MatrixF& log_mel, float log_floor) {
  MatrixF out = log_mel;
  const float s = -log_floor;
  for (auto& v : out.storage()) v = (v - log_floor) / s;
  return out;
}

MatrixF denormalize_mel(const MatrixF& norm, float log_floor) {
  MatrixF out = norm;
  const float s = -log_floor;
  for (auto& v : out.storage()) v = std::max(v * s + log_floor, log_floor);
  return out;
}

Synthesizer Synthesizer::build(const SynthesizerConfig& config, std::uint64_t seed) {
  config.validate();
  Synthesizer s;
  s.config_ = config;
  std::mt19937_64 rng(seed);
  auto& ps = s.params_;
  const auto& c = config;
  const std::size_t half = c.encoder_dim / 2;
  const std::size_t cond = c.conditioned_dim();

  {
    MatrixF emb(kVocabSize, c.char_embedding_dim);
    std::normal_distribution<float> n(0.0f, 0.3f);
    for (auto& v : emb.storage()) v = n(rng);
    s.char_embedding_ = ps.add("text.embedding", std::move(emb));
  }
  s.enc_conv_ = nn::Conv1d::make(ps, "text.conv", c.char_embedding_dim, c.char_embedding_dim,
                                 c.encoder_conv_kernel, rng);
  s.enc_fwd_ = nn::GruLayer::make(ps, "text.gru_fwd", c.char_embedding_dim, half, rng);
  s.enc_bwd_ = nn::GruLayer::make(ps, "text.gru_bwd", c.char_embedding_dim, half, rng);
  if (c.embedding_conditioning == Conditioning::LinearThenConcat)
    s.cond_proj_ = nn::Linear::make(ps, "cond_proj", c.speaker_embedding_dim, c.conditioning_proj_dim, rng);

  s.prenet1_ = nn::Linear::make(ps, "prenet1", c.n_mels, c.prenet_dim, rng);
  s.prenet2_ = nn::Linear::make(ps, "prenet2", c.prenet_dim, c.prenet_dim, rng);
  s.att_rnn_ = nn::GruLayer::make(ps, "att_rnn", c.prenet_dim + cond, c.attention_rnn_dim, rng);
  s.att_memory_ = nn::Linear::make(ps, "att.memory", cond, c.attention_dim, rng);
  s.att_query_ = nn::Linear::make(ps, "att.query", c.attention_rnn_dim, c.attention_dim, rng);
  // Location convolution over [previous, cumulative] weights folded into one dense map.
  s.att_location_ = nn::Linear::make(ps, "att.location", 2 * c.location_kernel, c.attention_dim, rng);
  s.att_v_ = ps.add("att.v", nn::glorot_uniform(c.attention_dim, 1, c.attention_dim, 1, rng));
  s.dec_rnn_ = nn::GruLayer::make(ps, "dec_rnn", c.attention_rnn_dim + cond, c.decoder_dim, rng);
  s.mel_out_ = nn::Linear::make(ps, "mel_out", c.decoder_dim + cond, c.reduction_factor * c.n_mels, rng);
  s.stop_out_ = nn::Linear::make(ps, "stop_out", c.decoder_dim + cond, 1, rng);
  return s;
}

VarF Synthesizer::encode_text(const std::vector<TextSequence>& texts) const {
  if (texts.empty()) throw Error(Errc::EmptyInput, "encode_text: no sequences");
  const std::size_t B = texts.size();
  std::size_t T = 0;
  for (const auto& t : texts) {
    if (t.token_ids.empty()) throw Error(Errc::EmptyInput, "encode_text: empty token sequence");
    for (std::size_t id : t.token_ids)
      if (id == 0 || id >= kVocabSize) throw Error(Errc::FormatError, "encode_text: token id out of range");
    T = std::max(T, t.token_ids.size());
  }

  // Time-major rows t*B + b. Padding rows are zeroed after the embedding
  // lookup so a sequence encodes the same alone or in a padded batch.
  std::vector<std::size_t> ids(T * B, 0), rev(T * B, 0);
  MatrixF mask(T * B, 1);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& tok = texts[b].token_ids;
    const std::size_t L = tok.size();
    for (std::size_t t = 0; t < L; ++t) {
      ids[t * B + b] = tok[t];
      mask(t * B + b, 0) = 1.0f;
    }
  }
  VarF x = nn::mul_col(nn::gather_rows(char_embedding_, ids), VarF::constant(mask));
  x = nn::mul_col(nn::relu(enc_conv_(x, T, B, true)), VarF::constant(mask));

  // Backward direction: reverse each sequence within its own length so the
  // padding trails in both passes.
  for (std::size_t b = 0; b < B; ++b) {
    const std::size_t L = texts[b].token_ids.size();
    for (std::size_t t = 0; t < T; ++t) rev[t * B + b] = (t < L ? L - 1 - t : t) * B + b;
  }
  VarF fwd = enc_fwd_(x, T, B);
  VarF bwd = nn::gather_rows(enc_bwd_(nn::gather_rows(x, rev), T, B), rev);
  VarF states = nn::concat_cols(std::vector<VarF>{fwd, bwd});

  std::vector<std::size_t> to_batch_major(T * B);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) to_batch_major[b * T + t] = t * B + b;
  return nn::gather_rows(states, to_batch_major);
}

MatrixF Synthesizer::encode_text(const TextSequence& text) const {
  return encode_text(std::vector<TextSequence>{text}).value();
}

VarF Synthesizer::condition(const VarF& states, std::size_t t_max,
                            const std::vector<std::vector<float>>& embeddings) const {
  const std::size_t B = embeddings.size();
  if (B == 0 || states.rows() != B * t_max)
    throw Error(Errc::ShapeError, "condition: states do not match the embedding batch");
  const std::size_t E = config_.speaker_embedding_dim;
  MatrixF emb(B, E);
  for (std::size_t b = 0; b < B; ++b) {
    if (embeddings[b].size() != E)
      throw Error(Errc::ConfigMismatch, "condition: embedding width " + std::to_string(embeddings[b].size()) +
                                            " != " + std::to_string(E));
    std::copy(embeddings[b].begin(), embeddings[b].end(), emb.data() + b * E);
  }
  VarF block = VarF::constant(std::move(emb));
  if (config_.embedding_conditioning == Conditioning::LinearThenConcat) block = cond_proj_(block);
  std::vector<std::size_t> spread(B * t_max);
  for (std::size_t i = 0; i < spread.size(); ++i) spread[i] = i / t_max;
  return nn::concat_cols(std::vector<VarF>{states, nn::gather_rows(block, spread)});
}

Synthesizer::Decoded Synthesizer::decode(const VarF& memory, const std::vector<std::size_t>& lengths,
                                         std::size_t t_max, const std::vector<MatrixF>& teacher,
                                         std::mt19937_64& rng) const {
  const auto& c = config_;
  const std::size_t B = lengths.size();
  const std::size_t K = c.location_kernel;
  const bool free_running = teacher.empty();
  if (free_running && B != 1) throw Error(Errc::ShapeError, "free-running decode takes one sequence");
  const std::size_t steps = free_running ? c.max_decoder_steps : teacher.size();

  const VarF processed = att_memory_(memory);
  MatrixF pad_mask(B, t_max);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = lengths[b]; t < t_max; ++t) pad_mask(b, t) = kMaskValue;
  const VarF pad = VarF::constant(std::move(pad_mask));

  VarF h_att = VarF::constant(MatrixF(B, c.attention_rnn_dim));
  VarF h_dec = VarF::constant(MatrixF(B, c.decoder_dim));
  VarF context = VarF::constant(MatrixF(B, memory.cols()));
  MatrixF prev_align(B, t_max), cum_align(B, t_max);
  MatrixF prev_frame(B, c.n_mels);

  Decoded out;
  for (std::size_t s = 0; s < steps; ++s) {
    const MatrixF& frame_in = free_running ? prev_frame : teacher[s];
    VarF p = VarF::constant(frame_in);
    p = nn::dropout(nn::relu(prenet1_(p)), c.prenet_dropout, rng);
    p = nn::dropout(nn::relu(prenet2_(p)), c.prenet_dropout, rng);
    h_att = gru_step(att_rnn_, nn::concat_cols(std::vector<VarF>{p, context}), h_att);

    // Location features are taken from the alignment values; no gradient
    // flows through earlier attention steps.
    MatrixF loc(B * t_max, 2);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < t_max; ++t) {
        loc(b * t_max + t, 0) = prev_align(b, t);
        loc(b * t_max + t, 1) = cum_align(b, t);
      }
    VarF loc_feat = att_location_(nn::im2col(VarF::constant(std::move(loc)), t_max, B, K, K / 2, false));
    VarF energy = nn::tanh(nn::add_segment_broadcast(nn::add(processed, loc_feat), att_query_(h_att), t_max));
    VarF scores = nn::add(nn::reshape(nn::matmul(energy, att_v_), B, t_max), pad);
    VarF align = nn::softmax_rows(scores);
    context = nn::segment_weighted_sum(align, memory);

    h_dec = gru_step(dec_rnn_, nn::concat_cols(std::vector<VarF>{h_att, context}), h_dec);
    VarF proj_in = nn::concat_cols(std::vector<VarF>{h_dec, context});
    VarF mel = mel_out_(proj_in);
    VarF stop = stop_out_(proj_in);

    prev_align = align.value();
    for (std::size_t i = 0; i < cum_align.size(); ++i) cum_align[i] += prev_align[i];
    out.align_steps.push_back(align);
    out.mel_steps.push_back(mel);
    out.stop_steps.push_back(stop);

    if (free_running) {
      if (!all_finite(mel.value())) throw Error(Errc::NumericalError, "non-finite decoder output");
      const float* last = mel.value().data() + (c.reduction_factor - 1) * c.n_mels;
      std::copy(last, last + c.n_mels, prev_frame.data());
      if (stop.item() > 0.0f) break;  // sigmoid(logit) > 0.5
    }
  }
  return out;
}

SynthLoss Synthesizer::teacher_forced(const std::vector<SynthExample>& batch, std::mt19937_64& rng) const {
  const auto& c = config_;
  if (batch.empty()) throw Error(Errc::EmptyInput, "teacher_forced: empty batch");
  const std::size_t B = batch.size(), r = c.reduction_factor, nm = c.n_mels;

  std::vector<TextSequence> texts;
  std::vector<std::vector<float>> embeddings;
  std::vector<std::size_t> lengths, frames, nsteps;
  std::vector<MatrixF> targets;
  std::size_t steps = 0;
  for (const auto& ex : batch) {
    if (ex.target.n_mels() != nm) throw Error(Errc::ConfigMismatch, "target mel width differs from n_mels");
    if (ex.target.num_frames() == 0) throw Error(Errc::EmptyInput, "empty target mel");
    if (!all_finite(ex.target.frames)) throw Error(Errc::NumericalError, "non-finite target mel");
    texts.push_back(ex.text);
    embeddings.push_back(ex.embedding);
    lengths.push_back(ex.text.token_ids.size());
    frames.push_back(ex.target.num_frames());
    nsteps.push_back((frames.back() + r - 1) / r);
    targets.push_back(normalize_mel(ex.target.frames, c.log_floor));
    steps = std::max(steps, nsteps.back());
  }
  const std::size_t t_max = *std::max_element(lengths.begin(), lengths.end());
  VarF memory = condition(encode_text(texts), t_max, embeddings);

  // Step s consumes the last frame of group s-1 (all zeros for s = 0).
  std::vector<MatrixF> teacher(steps, MatrixF(B, nm));
  MatrixF tgt(steps * B, r * nm), mask(steps * B, r * nm);
  MatrixF stop_tgt(steps * B, 1), stop_w(steps * B, 1);
  std::size_t count = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const MatrixF& m = targets[b];
    for (std::size_t s = 0; s < steps; ++s) {
      if (s > 0 && s * r - 1 < frames[b]) std::copy_n(m.data() + (s * r - 1) * nm, nm, teacher[s].data() + b * nm);
      for (std::size_t k = 0; k < r; ++k) {
        const std::size_t f = s * r + k;
        if (f >= frames[b]) continue;
        std::copy_n(m.data() + f * nm, nm, tgt.data() + (s * B + b) * r * nm + k * nm);
        std::fill_n(mask.data() + (s * B + b) * r * nm + k * nm, nm, 1.0f);
        count += nm;
      }
      if (s < nsteps[b]) {
        stop_w(s * B + b, 0) = 1.0f;
        stop_tgt(s * B + b, 0) = s + 1 == nsteps[b] ? 1.0f : 0.0f;
      }
    }
  }

  Decoded d = decode(memory, lengths, t_max, teacher, rng);
  VarF pred = nn::concat_rows(d.mel_steps);
  VarF stops = nn::concat_rows(d.stop_steps);
  VarF diff = nn::hadamard(nn::abs(nn::sub(pred, VarF::constant(tgt))), VarF::constant(mask));
  VarF l1 = nn::scale(nn::sum_all(diff), 1.0f / static_cast<float>(count));
  VarF bce = nn::bce_with_logits(stops, stop_tgt, stop_w);

  // Attention mass far from the diagonal t/L ~ s/S is penalised:
  // W = 1 - exp(-(t/L - s/S)^2 / (2 sigma^2)), averaged over decoder steps.
  MatrixF band(steps * B, t_max);
  std::size_t rows = 0;
  const float two_sig2 = 2.0f * c.guided_attention_sigma * c.guided_attention_sigma;
  for (std::size_t s = 0; s < steps; ++s)
    for (std::size_t b = 0; b < B; ++b) {
      if (s >= nsteps[b]) continue;
      ++rows;
      const float pos = static_cast<float>(s) / static_cast<float>(nsteps[b]);
      for (std::size_t t = 0; t < lengths[b]; ++t) {
        const float dlt = static_cast<float>(t) / static_cast<float>(lengths[b]) - pos;
        band(s * B + b, t) = 1.0f - std::exp(-dlt * dlt / two_sig2);
      }
    }
  VarF guided = nn::scale(nn::sum_all(nn::hadamard(nn::concat_rows(d.align_steps), VarF::constant(std::move(band)))),
                          1.0f / static_cast<float>(rows));

  SynthLoss loss;
  loss.total = nn::add(l1, nn::scale(bce, c.stop_weight));
  if (c.guided_attention_weight > 0.0f) loss.total = nn::add(loss.total, nn::scale(guided, c.guided_attention_weight));
  loss.l1 = l1.item();
  loss.stop = bce.item();
  loss.guided = guided.item();
  if (!std::isfinite(loss.total.item())) throw Error(Errc::NumericalError, "non-finite synthesizer loss");

  for (std::size_t b = 0; b < B; ++b) {
    SynthOutput o;
    o.mel_pred = MatrixF(frames[b], nm);
    o.alignment = MatrixF(nsteps[b], lengths[b]);
    for (std::size_t s = 0; s < nsteps[b]; ++s) {
      const float* row = d.mel_steps[s].value().data() + b * r * nm;
      for (std::size_t k = 0; k < r && s * r + k < frames[b]; ++k)
        std::copy_n(row + k * nm, nm, o.mel_pred.data() + (s * r + k) * nm);
      o.stop_logits.push_back(d.stop_steps[s].value()(b, 0));
      std::copy_n(d.align_steps[s].value().data() + b * t_max, lengths[b], o.alignment.data() + s * lengths[b]);
    }
    loss.outputs.push_back(std::move(o));
  }
  return loss;
}

SynthOutput Synthesizer::infer(const TextSequence& text, const std::vector<float>& embedding,
                               std::uint64_t seed) const {
  const auto& c = config_;
  std::mt19937_64 rng(seed);
  const std::size_t L = text.token_ids.size();
  VarF memory = condition(encode_text(std::vector<TextSequence>{text}), L, {embedding});
  Decoded d = decode(memory, {L}, L, {}, rng);

  SynthOutput o;
  const std::size_t steps = d.mel_steps.size();
  o.mel_pred = MatrixF(steps * c.reduction_factor, c.n_mels);
  o.alignment = MatrixF(steps, L);
  for (std::size_t s = 0; s < steps; ++s) {
    const MatrixF& m = d.mel_steps[s].value();
    std::copy(m.storage().begin(), m.storage().end(), o.mel_pred.data() + s * m.size());
    o.stop_logits.push_back(d.stop_steps[s].item());
    std::copy(d.align_steps[s].value().storage().begin(), d.align_steps[s].value().storage().end(), o.alignment.data() + s * L);
  }
  o.non_converged_stop = o.stop_logits.back() <= 0.0f;
  return o;
}

audio::MelSpectrogram Synthesizer::infer_mel(const TextSequence& text, const std::vector<float>& embedding,
                                             std::uint64_t seed, bool* non_converged) const {
  SynthOutput o = infer(text, embedding, seed);
  if (non_converged) *non_converged = o.non_converged_stop;
  audio::MelSpectrogram mel;
  mel.config = audio::MelConfig::synthesizer();
  mel.config.n_mels = static_cast<int>(config_.n_mels);
  mel.config.log_floor = config_.log_floor;
  mel.frames = denormalize_mel(o.mel_pred, config_.log_floor);
  return mel;
}

}  // namespace clonecraft::synth
