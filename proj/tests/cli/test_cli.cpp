#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "cli.hpp"
#include "clonecraft/audio/waveform.hpp"
#include "clonecraft/data/manifest.hpp"
#include "clonecraft/encoder/encoder.hpp"
#include "doctest.h"

using namespace clonecraft;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "clonecraft");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Small enough that the whole pipeline runs in seconds.
const std::vector<std::string> kTiny = {
    "--set", "corpus.n_speakers=3", "--set", "corpus.utts_per_speaker=6", "--set", "corpus.test_per_speaker=3",
    "--set", "encoder.recurrent_units=8", "--set", "encoder.projection_dim=4",
    "--set", "encoder.embedding_dim=8", "--set", "batch.n_speakers=3", "--set", "batch.m_utterances=2",
    "--set", "encoder_train.max_steps=3", "--set", "encoder_train.checkpoint_every=0",
    "--set", "synthesizer.char_embedding_dim=8", "--set", "synthesizer.encoder_dim=8",
    "--set", "synthesizer.speaker_embedding_dim=8", "--set", "synthesizer.conditioning_proj_dim=4",
    "--set", "synthesizer.prenet_dim=8", "--set", "synthesizer.attention_dim=8",
    "--set", "synthesizer.location_kernel=3", "--set", "synthesizer.attention_rnn_dim=8",
    "--set", "synthesizer.decoder_dim=8", "--set", "synthesizer.max_decoder_steps=12",
    "--set", "synth_train.max_steps=2", "--set", "synth_train.checkpoint_every=0", "--set", "synth_batch_size=2",
    "--set", "eval.enroll_per_speaker=2", "--set", "eval.similarity_per_speaker=1",
    "--set", "inversion.n_iterations=2", "--set", "inversion.nnls_iterations=2"};

std::vector<std::string> tiny(std::vector<std::string> head, const std::vector<std::string>& tail = {}) {
  head.insert(head.end(), kTiny.begin(), kTiny.end());
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("help output matches the golden file") {
  const auto r = invoke({"--help-all"});
  CHECK(r.code == 0);
  CHECK(r.out == slurp(CLONECRAFT_GOLDEN_HELP));
}

TEST_CASE("config layering: file, overrides, seed") {
  const auto dir = fs::temp_directory_path() / "clonecraft_cli_cfg";
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "c.json");
    os << R"({"encoder": {"recurrent_units": 64}, "synth_train": {"gamma": 0.5}})";
  }
  const auto t = cli::resolve_config(dir / "c.json", {"encoder.recurrent_units=32", "encoder.architecture=gru"}, 9);
  CHECK(t["encoder"]["recurrent_units"] == 32);
  CHECK(t["encoder"]["architecture"] == "gru");
  CHECK(t["synth_train"]["gamma"] == 0.5);
  CHECK(t["encoder_train"]["gamma"].is_null());
  CHECK(t["seed"] == 9);
  CHECK(t["encoder"]["projection_dim"] == cli::default_config()["encoder"]["projection_dim"]);

  auto code = [](auto f) -> std::optional<Errc> {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  CHECK(code([] { cli::resolve_config({}, {"encoder.units=3"}, {}); }) == Errc::ConfigError);
  CHECK(code([] { cli::resolve_config({}, {"encoder_train.seed=3"}, {}); }) == Errc::ConfigError);
  CHECK(code([] { cli::resolve_config({}, {"encoder.recurrent_units=abc"}, {}); }) == Errc::ConfigError);
  CHECK(code([] { cli::resolve_config({}, {"encoder.recurrent_units=-4"}, {}); }) == Errc::ConfigError);
  CHECK(code([] { cli::resolve_config({}, {"encoder.dropout=1"}, {}); }) == std::nullopt);
  CHECK(code([] { cli::resolve_config({}, {"encoder=3"}, {}); }) == Errc::ConfigError);
  CHECK(code([] { cli::resolve_config({}, {"noequals"}, {}); }) == Errc::ConfigError);
  CHECK(code([&] { cli::resolve_config(dir / "missing.json", {}, {}); }) == Errc::ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("usage and config errors exit 2, runtime errors exit 1") {
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"eval-eer"}).code == 2);  // --encoder missing
  CHECK(invoke({"--set", "nope=1", "train-encoder", "--manifest", "x.tsv"}).code == 2);
  CHECK(invoke({"--set", "encoder.architecture=transformer", "train-encoder", "--manifest", "x.tsv"}).code == 2);
  const auto dir = fs::temp_directory_path() / "clonecraft_cli_err";
  const auto r = invoke({"--out-dir", dir.string(), "eval-eer", "--encoder", (dir / "none.ccpt").string(),
                         "--manifest", (dir / "none.tsv").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("every subcommand runs end to end on a tiny corpus") {
  const auto root = fs::temp_directory_path() / "clonecraft_cli_e2e";
  fs::remove_all(root);
  const auto data = (root / "data").string(), out = (root / "out").string();
  const std::vector<std::string> where{"--data-dir", data, "--out-dir", out};

  auto r = invoke(tiny({"synth-corpus"}, where));
  INFO(r.err);
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["utterances"] == 18);
  CHECK(r.err.find("config: ") != std::string::npos);

  r = invoke(tiny({"train-encoder"}, where));
  REQUIRE(r.code == 0);
  const std::string enc = json::parse(r.out)["checkpoint"];
  CHECK(fs::exists(fs::path(out) / "metrics.jsonl"));
  CHECK(fs::exists(fs::path(out) / "config.json"));

  SUBCASE("embed writes a unit-norm DVEC") {
    const auto wav = fs::path(data) / "spk00" / "spk00_u000.wav";
    r = invoke(tiny({"embed", "--encoder", enc, "--in", wav.string()}, where));
    REQUIRE(r.code == 0);
    const auto v = encoder::read_dvec(fs::path(out) / "spk00_u000.dvec");
    CHECK(v.size() == 8);
    double n = 0;
    for (float x : v) n += static_cast<double>(x) * x;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-5));
  }
  SUBCASE("eval-eer prints a summary with an eer field") {
    r = invoke(tiny({"eval-eer", "--encoder", enc}, where));
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.contains("eer"));
    CHECK(j["eer"].get<double>() >= 0.0);
    CHECK(j["eer"].get<double>() <= 1.0);
    CHECK(fs::exists(fs::path(out) / "trials.csv"));
  }
  SUBCASE("project writes the projection and the raw embeddings") {
    r = invoke(tiny({"project", "--encoder", enc}, where));
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["points"] == 9);
    CHECK(fs::exists(fs::path(out) / "projection.csv"));
    CHECK(fs::exists(fs::path(out) / "embeddings.csv"));
  }
  SUBCASE("synthesizer training, cloning and similarity") {
    CHECK(invoke(tiny({"train-synth", "--encoder", (root / "missing.ccpt").string()}, where)).code == 1);
    r = invoke(tiny({"train-synth", "--encoder", enc}, where));
    REQUIRE(r.code == 0);
    auto j = json::parse(r.out);
    CHECK(j["encoder_hash_before"] == j["encoder_hash_after"]);
    const std::string syn = j["checkpoint"];

    const auto ref = fs::path(data) / "spk01" / "spk01_u000.wav";
    r = invoke(tiny({"clone", "--encoder", enc, "--synth", syn, "--ref", ref.string(), "--text", "hello"}, where));
    REQUIRE(r.code == 0);
    const auto w = audio::read_wav(fs::path(out) / "clone.wav");
    CHECK(w.size() > 0);
    CHECK(fs::exists(fs::path(out) / "clone.melf"));

    r = invoke(tiny({"eval-similarity", "--encoder", enc, "--synth", syn}, where));
    REQUIRE(r.code == 0);
    j = json::parse(r.out);
    CHECK(j["same_speaker"].size() == 3);
    CHECK(fs::exists(fs::path(out) / "similarity.csv"));
  }
  SUBCASE("--seed makes training outputs reproducible") {
    const auto a = (root / "a").string(), b = (root / "b").string();
    REQUIRE(invoke(tiny({"--seed", "5", "--data-dir", data, "--out-dir", a, "train-encoder"})).code == 0);
    REQUIRE(invoke(tiny({"--seed", "5", "--data-dir", data, "--out-dir", b, "train-encoder"})).code == 0);
    CHECK(slurp(fs::path(a) / "encoder.ccpt") == slurp(fs::path(b) / "encoder.ccpt"));
  }
  fs::remove_all(root);
}

TEST_CASE("ingest builds a manifest from a speaker directory tree") {
  const auto root = fs::temp_directory_path() / "clonecraft_cli_ingest";
  fs::remove_all(root);
  const audio::Waveform w{std::vector<float>(8000, 0.1f), 16000};
  for (const char* spk : {"alice", "bob"})
    for (int i = 0; i < 3; ++i) {
      fs::create_directories(root / spk);
      audio::write_wav(root / spk / ("u" + std::to_string(i) + ".wav"), w);
    }
  std::ofstream(root / "alice" / "u0.txt") << "hello there\n";
  const auto r = invoke({"--set", "corpus.test_per_speaker=1", "ingest", "--in", root.string()});
  REQUIRE(r.code == 0);
  const auto m = data::load_manifest(root / "manifest.tsv");
  REQUIRE(m.size() == 6);
  CHECK(m.entries()[0].transcript == "hello there");
  CHECK(m.entries()[0].duration_s == doctest::Approx(0.5));
  CHECK(m.entries()[2].split == data::Split::Test);
  CHECK(m.subset(data::Split::Test).size() == 2);
  CHECK(audio::read_wav(m.resolve(m.entries()[4])).size() == 8000);
  CHECK(invoke({"ingest", "--in", (root / "nowhere").string()}).code == 1);
  fs::remove_all(root);
}
