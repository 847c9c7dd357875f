#include <random>

#include "../oracles/l1_oracle.hpp"
#include "clonecraft/nn/optim.hpp"
#include "clonecraft/synth/synthesizer.hpp"
#include "doctest.h"
#include "expect.hpp"

using namespace clonecraft;
using namespace clonecraft::synth;
using clonecraft::testing::error_code;

namespace {

SynthesizerConfig tiny(Conditioning mode = Conditioning::LinearThenConcat) {
  SynthesizerConfig c;
  c.char_embedding_dim = 12;
  c.encoder_dim = 10;
  c.embedding_conditioning = mode;
  c.speaker_embedding_dim = 6;
  c.conditioning_proj_dim = 4;
  c.prenet_dim = 8;
  c.attention_dim = 8;
  c.location_kernel = 5;
  c.attention_rnn_dim = 12;
  c.decoder_dim = 12;
  c.n_mels = 5;
  c.reduction_factor = 2;
  c.max_decoder_steps = 20;
  return c;
}

std::vector<float> unit_vector(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n;
  std::vector<float> v(d);
  float s = 0;
  for (auto& x : v) {
    x = n(rng);
    s += x * x;
  }
  for (auto& x : v) x /= std::sqrt(s);
  return v;
}

SynthExample example(const std::string& text, std::size_t frames, std::size_t n_mels, std::uint64_t seed,
                     std::size_t emb_dim) {
  SynthExample ex;
  ex.text = text_to_sequence(text);
  ex.embedding = unit_vector(emb_dim, seed);
  ex.target.config = audio::MelConfig::synthesizer();
  ex.target.config.n_mels = static_cast<int>(n_mels);
  ex.target.frames = MatrixF(frames, n_mels);
  std::mt19937_64 rng(seed + 1);
  std::uniform_real_distribution<float> u(-10.0f, -1.0f);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < n_mels; ++j) ex.target.frames(t, j) = u(rng) * 0.3f + std::sin(0.3f * t + j) - 4.0f;
  return ex;
}

}  // namespace

TEST_CASE("text front-end maps characters and rejects bad input") {
  const auto s = text_to_sequence("Ab c");
  CHECK(s.token_ids == std::vector<std::size_t>{2, 3, 1, 4});
  CHECK(s.raw_text == "Ab c");
  CHECK(error_code([] { text_to_sequence(""); }) == Errc::EmptyInput);
  CHECK(error_code([] { text_to_sequence("caf\xc3\xa9"); }) == Errc::FormatError);
}

TEST_CASE("encode_text gives one state per token, deterministically") {
  const auto model = Synthesizer::build(tiny(), 3);
  const auto a = text_to_sequence("hello there");
  const MatrixF s1 = model.encode_text(a);
  CHECK(s1.rows() == a.token_ids.size());
  CHECK(s1.cols() == 10);
  CHECK(model.encode_text(a) == s1);

  auto b = a;
  b.token_ids[4] = text_to_sequence("x").token_ids[0];
  const MatrixF s2 = model.encode_text(b);
  double diff = 0;
  for (std::size_t i = 0; i < s1.size(); ++i) diff += std::fabs(s1[i] - s2[i]);
  CHECK(diff > 1e-4);

  CHECK(error_code([&] { model.encode_text(TextSequence{}); }) == Errc::EmptyInput);
}

TEST_CASE("batched text encoding matches per-sequence encoding") {
  const auto model = Synthesizer::build(tiny(), 4);
  const auto a = text_to_sequence("short");
  const auto b = text_to_sequence("a longer one");
  const MatrixF batch = model.encode_text(std::vector<TextSequence>{a, b}).value();
  const MatrixF sa = model.encode_text(a), sb = model.encode_text(b);
  const std::size_t T = b.token_ids.size();
  for (std::size_t t = 0; t < a.token_ids.size(); ++t)
    for (std::size_t j = 0; j < sa.cols(); ++j) CHECK(batch(t, j) == doctest::Approx(sa(t, j)).epsilon(1e-5));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < sb.cols(); ++j) CHECK(batch(T + t, j) == doctest::Approx(sb(t, j)).epsilon(1e-5));
}

TEST_CASE("conditioning mode laws") {
  for (auto mode : {Conditioning::DirectConcat, Conditioning::LinearThenConcat}) {
    const auto cfg = tiny(mode);
    const auto model = Synthesizer::build(cfg, 5);
    const auto text = text_to_sequence("abc");
    const auto states = model.encode_text(std::vector<TextSequence>{text});
    const auto out = model.condition(states, 3, {unit_vector(6, 1)});
    const std::size_t expect = 10 + (mode == Conditioning::DirectConcat ? 6 : 4);
    CHECK(out.cols() == expect);
    CHECK(cfg.conditioned_dim() == expect);
    // same appended block at every timestep
    for (std::size_t t = 1; t < 3; ++t)
      for (std::size_t j = 10; j < expect; ++j) CHECK(out.value()(t, j) == out.value()(0, j));
    CHECK(error_code([&] { model.condition(states, 3, {unit_vector(7, 1)}); }) == Errc::ConfigMismatch);
  }
  SynthesizerConfig full;
  full.embedding_conditioning = Conditioning::DirectConcat;
  CHECK(full.conditioned_dim() == 512);
}

TEST_CASE("direct concatenation changes only the appended block") {
  const auto model = Synthesizer::build(tiny(Conditioning::DirectConcat), 6);
  const auto states = model.encode_text(std::vector<TextSequence>{text_to_sequence("abcd")});
  const auto e1 = unit_vector(6, 1), e2 = unit_vector(6, 2);
  const MatrixF a = model.condition(states, 4, {e1}).value();
  const MatrixF b = model.condition(states, 4, {e2}).value();
  for (std::size_t t = 0; t < 4; ++t) {
    for (std::size_t j = 0; j < 10; ++j) CHECK(a(t, j) == b(t, j));
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(a(t, 10 + j) == e1[j]);
      CHECK(b(t, 10 + j) == e2[j]);
    }
  }
}

TEST_CASE("zero projection appends zeros") {
  auto model = Synthesizer::build(tiny(), 7);
  model.parameters().get("cond_proj.weight").node()->value.fill(0.0f);
  const auto states = model.encode_text(std::vector<TextSequence>{text_to_sequence("hi")});
  const MatrixF out = model.condition(states, 2, {unit_vector(6, 9)}).value();
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t j = 10; j < 14; ++j) CHECK(out(t, j) == 0.0f);
}

TEST_CASE("switching conditioning mode changes the parameter count by the projection size") {
  // With proj width equal to the embedding width the downstream layers keep their shapes.
  auto direct = tiny(Conditioning::DirectConcat);
  auto linear = tiny(Conditioning::LinearThenConcat);
  direct.conditioning_proj_dim = linear.conditioning_proj_dim = 6;
  const std::size_t nd = Synthesizer::build(direct, 1).parameters().scalar_count();
  const std::size_t nl = Synthesizer::build(linear, 1).parameters().scalar_count();
  CHECK(nl - nd == 6 * 6 + 6);

  SynthesizerConfig a, b;
  a.embedding_conditioning = Conditioning::DirectConcat;
  b.embedding_conditioning = Conditioning::LinearThenConcat;
  const std::size_t pa = Synthesizer::build(a, 1).parameters().scalar_count();
  const std::size_t pb = Synthesizer::build(b, 1).parameters().scalar_count();
  CHECK(pb - pa == 256 * 256 + 256);
}

TEST_CASE("synth_loss equals a loop-based mean absolute difference") {
  std::mt19937_64 rng(10);
  std::normal_distribution<float> n;
  for (int rep = 0; rep < 5; ++rep) {
    MatrixF a(7, 80), b(7, 80);
    for (auto& v : a.storage()) v = n(rng);
    for (auto& v : b.storage()) v = n(rng);
    const double got = synth_loss(nn::VarF::constant(a), nn::VarF::constant(b)).item();
    CHECK(got == doctest::Approx(clonecraft::testing::mean_abs_diff(a, b)).epsilon(1e-6));
  }
  MatrixF a(3, 80, 0.25f), b = a;
  CHECK(synth_loss(nn::VarF::constant(a), nn::VarF::constant(b)).item() == 0.0f);
  for (auto& v : b.storage()) v += 0.5f;
  CHECK(synth_loss(nn::VarF::constant(b), nn::VarF::constant(a)).item() == doctest::Approx(0.5));
  CHECK(error_code([&] { synth_loss(nn::VarF::constant(a), nn::VarF::constant(MatrixF(3, 79))); }) ==
        Errc::ShapeError);
}

TEST_CASE("mel normalisation maps the floor to 0 and 0 to 1") {
  MatrixF m(1, 3, std::vector<float>{-12.0f, -6.0f, 0.0f});
  const MatrixF n = normalize_mel(m, -12.0f);
  CHECK(n[0] == 0.0f);
  CHECK(n[1] == doctest::Approx(0.5));
  CHECK(n[2] == doctest::Approx(1.0));
  CHECK(denormalize_mel(n, -12.0f) == m);
}

TEST_CASE("teacher forcing shapes, alignment normalisation and masking") {
  const auto cfg = tiny();
  const auto model = Synthesizer::build(cfg, 11);
  std::mt19937_64 rng(1);
  const auto ex1 = example("abc de", 9, 5, 1, 6);
  const auto ex2 = example("fg", 14, 5, 2, 6);
  const auto loss = model.teacher_forced({ex1, ex2}, rng);
  REQUIRE(loss.outputs.size() == 2);
  CHECK(loss.outputs[0].mel_pred.rows() == 9);
  CHECK(loss.outputs[0].stop_logits.size() == 5);  // ceil(9 / 2)
  CHECK(loss.outputs[1].stop_logits.size() == 7);
  CHECK(loss.outputs[0].alignment.cols() == 6);
  CHECK(loss.outputs[1].alignment.cols() == 2);
  for (const auto& o : loss.outputs) {
    for (std::size_t s = 0; s < o.alignment.rows(); ++s) {
      double sum = 0;
      for (std::size_t t = 0; t < o.alignment.cols(); ++t) {
        CHECK(o.alignment(s, t) >= 0.0f);
        sum += o.alignment(s, t);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
  CHECK(std::isfinite(loss.total.item()));

  // The padded batch scores each example as if it were alone (up to dropout masks).
  auto no_drop = cfg;
  no_drop.prenet_dropout = 0.0f;
  const auto det = Synthesizer::build(no_drop, 11);
  std::mt19937_64 r1(1), r2(1), r3(1);
  const auto both = det.teacher_forced({ex1, ex2}, r1);
  const auto one = det.teacher_forced({ex1}, r2);
  const auto two = det.teacher_forced({ex2}, r3);
  for (std::size_t i = 0; i < one.outputs[0].mel_pred.size(); ++i)
    CHECK(both.outputs[0].mel_pred[i] == doctest::Approx(one.outputs[0].mel_pred[i]).epsilon(1e-4));
  for (std::size_t i = 0; i < two.outputs[0].mel_pred.size(); ++i)
    CHECK(both.outputs[1].mel_pred[i] == doctest::Approx(two.outputs[0].mel_pred[i]).epsilon(1e-4));
}

TEST_CASE("teacher forcing rejects non-finite targets") {
  const auto model = Synthesizer::build(tiny(), 12);
  auto ex = example("ab", 4, 5, 3, 6);
  ex.target.frames(1, 1) = std::nanf("");
  std::mt19937_64 rng(1);
  CHECK(error_code([&] { model.teacher_forced({ex}, rng); }) == Errc::NumericalError);
}

TEST_CASE("one optimisation step moves the conditioning projection") {
  auto model = Synthesizer::build(tiny(), 13);
  const MatrixF before = model.parameters().get("cond_proj.weight").value();
  nn::Adam adam;
  adam.add_group(model.parameters());
  std::mt19937_64 rng(2);
  nn::Tape<float> tape;
  {
    nn::TapeScope<float> scope(tape);
    auto loss = model.teacher_forced({example("hello", 8, 5, 4, 6)}, rng);
    tape.backward(loss.total);
  }
  adam.step(1e-3f);
  CHECK_FALSE(model.parameters().get("cond_proj.weight").value() == before);
}

TEST_CASE("overfitting one pair lowers the L1 term") {
  auto model = Synthesizer::build(tiny(), 14);
  const auto ex = example("abcdef", 12, 5, 5, 6);
  nn::Adam adam;
  adam.add_group(model.parameters());
  std::mt19937_64 rng(3);
  double first = 0, last = 0;
  for (int i = 0; i < 60; ++i) {
    nn::Tape<float> tape;
    SynthLoss loss;
    {
      nn::TapeScope<float> scope(tape);
      loss = model.teacher_forced({ex}, rng);
      model.parameters().zero_grad();
      tape.backward(loss.total);
    }
    adam.step(3e-3f);
    if (i == 0) first = loss.l1;
    last = loss.l1;
  }
  CHECK(last < first);
}

TEST_CASE("inference is capped, seeded and embedding-sensitive") {
  const auto cfg = tiny();
  const auto model = Synthesizer::build(cfg, 15);
  const auto text = text_to_sequence("test");
  const auto e1 = unit_vector(6, 1), e2 = unit_vector(6, 2);
  const auto a = model.infer(text, e1, 9);
  const auto b = model.infer(text, e1, 9);
  CHECK(a.mel_pred == b.mel_pred);
  CHECK(a.mel_pred.rows() <= cfg.max_decoder_steps * cfg.reduction_factor);
  CHECK(a.alignment.rows() == a.stop_logits.size());
  CHECK(a.non_converged_stop == (a.stop_logits.size() == cfg.max_decoder_steps && a.stop_logits.back() <= 0.0f));
  const auto c = model.infer(text, e2, 9);
  const std::size_t n = std::min(a.mel_pred.size(), c.mel_pred.size());
  double diff = 0;
  for (std::size_t i = 0; i < n; ++i) diff += std::fabs(a.mel_pred[i] - c.mel_pred[i]);
  CHECK(diff > 0.0);

  const auto mel = model.infer_mel(text, e1, 9);
  CHECK(mel.n_mels() == 5);
  for (float v : mel.frames.storage()) CHECK(v >= cfg.log_floor);
}

TEST_CASE("synthesizer config validation and JSON round trip") {
  auto c = SynthesizerConfig::desk();
  c.embedding_conditioning = Conditioning::DirectConcat;
  nlohmann::json j = c;
  CHECK(j.get<SynthesizerConfig>() == c);
  CHECK(error_code([] { parse_conditioning("film"); }) == Errc::ConfigError);
  auto bad = c;
  bad.encoder_dim = 7;
  CHECK(error_code([&] { bad.validate(); }) == Errc::ConfigError);
}
