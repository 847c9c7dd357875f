#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "clonecraft/audio/waveform.hpp"
#include "clonecraft/core/error.hpp"
#include "clonecraft/data/manifest.hpp"
#include "clonecraft/data/sampler.hpp"
#include "clonecraft/data/synthetic.hpp"
#include "clonecraft/encoder/encoder.hpp"
#include "clonecraft/eval/eer.hpp"
#include "clonecraft/eval/pipeline.hpp"
#include "clonecraft/eval/projection.hpp"
#include "clonecraft/eval/similarity.hpp"
#include "clonecraft/synth/synthesizer.hpp"
#include "clonecraft/train/encoder_trainer.hpp"
#include "clonecraft/train/synth_trainer.hpp"
#include "clonecraft/vocoder/inversion.hpp"

namespace clonecraft::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json train_defaults() {
  json j = train::TrainConfig{};
  j.erase("seed");  // single top-level seed
  j["gamma"] = nullptr;
  return j;
}

std::string kind_name(const json& v) {
  if (v.is_number_unsigned()) return "non-negative integer";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  return v.type_name();
}

bool compatible(const json& base, const json& v) {
  if (base.is_null()) return true;
  if (base.is_number_unsigned()) return v.is_number_unsigned();
  if (base.is_number_integer()) return v.is_number_integer();
  if (base.is_number()) return v.is_number();
  return base.type() == v.type();
}

void merge(json& base, const json& overlay, const std::string& where) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw Error(Errc::ConfigError, "unknown config key " + key);
    json& slot = base[it.key()];
    if (slot.is_object()) {
      if (!it->is_object()) throw Error(Errc::ConfigError, key + " must be an object");
      merge(slot, *it, key);
    } else {
      if (!compatible(slot, *it))
        throw Error(Errc::ConfigError, key + " expects " + kind_name(slot) + ", got " + kind_name(*it));
      slot = *it;
    }
  }
}

json parse_override(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(Errc::ConfigError, "override must be key=value: " + kv);
  const std::string key = kv.substr(0, eq), raw = kv.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json out = json::object();
  json* node = &out;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw Error(Errc::ConfigError, "bad override key " + key);
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
  return out;
}

struct Resolved {
  json tree;
  std::uint64_t seed;
  encoder::EncoderConfig encoder;
  data::SpeakerBatchSpec batch;
  train::TrainConfig encoder_train, synth_train;
  synth::SynthesizerConfig synthesizer;
  std::size_t synth_batch_size;
  data::SyntheticCorpusConfig corpus;
  std::size_t enroll_per_speaker, similarity_per_speaker;
  data::Split split;
  vocoder::InversionConfig inversion;
};

Resolved materialise(const json& t) {
  Resolved r;
  r.tree = t;
  try {
    r.seed = t.at("seed").get<std::uint64_t>();
    r.encoder = t.at("encoder").get<encoder::EncoderConfig>();
    r.encoder.validate();
    r.batch.n_speakers = t.at("batch").at("n_speakers").get<std::size_t>();
    r.batch.m_utterances = t.at("batch").at("m_utterances").get<std::size_t>();
    r.encoder_train = t.at("encoder_train").get<train::TrainConfig>();
    r.synth_train = t.at("synth_train").get<train::TrainConfig>();
    r.encoder_train.seed = r.synth_train.seed = r.seed;
    r.encoder_train.validate();
    r.synth_train.validate();
    r.synthesizer = t.at("synthesizer").get<synth::SynthesizerConfig>();
    r.synthesizer.validate();
    r.synth_batch_size = t.at("synth_batch_size").get<std::size_t>();
    if (r.synth_batch_size == 0) throw Error(Errc::ConfigError, "synth_batch_size must be positive");
    const json& c = t.at("corpus");
    r.corpus.n_speakers = c.at("n_speakers").get<std::size_t>();
    r.corpus.utts_per_speaker = c.at("utts_per_speaker").get<std::size_t>();
    r.corpus.test_per_speaker = c.at("test_per_speaker").get<std::size_t>();
    r.corpus.min_duration_s = c.at("min_duration_s").get<double>();
    r.corpus.sample_rate = c.at("sample_rate").get<int>();
    r.corpus.seed = r.seed;
    const json& e = t.at("eval");
    r.enroll_per_speaker = e.at("enroll_per_speaker").get<std::size_t>();
    r.similarity_per_speaker = e.at("similarity_per_speaker").get<std::size_t>();
    r.split = data::parse_split(e.at("split").get<std::string>());
    r.inversion = vocoder::InversionConfig::for_mel(audio::MelConfig::synthesizer());
    const json& v = t.at("inversion");
    r.inversion.n_iterations = v.at("n_iterations").get<std::size_t>();
    r.inversion.nnls_iterations = v.at("nnls_iterations").get<std::size_t>();
    r.inversion.power = v.at("power").get<float>();
    r.inversion.momentum = v.at("momentum").get<float>();
    r.inversion.peak = v.at("peak").get<float>();
    r.inversion.seed = r.seed;
    r.inversion.validate();
  } catch (const Error& err) {
    if (err.code() == Errc::ConfigError) throw;
    throw Error(Errc::ConfigError, err.what());
  } catch (const json::exception& err) {
    throw Error(Errc::ConfigError, err.what());
  }
  return r;
}

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string data_dir;
  std::string manifest;
  std::string in, out, encoder, synth, ref, text;
};

fs::path manifest_path(const Options& o) {
  if (!o.manifest.empty()) return o.manifest;
  if (!o.data_dir.empty()) return fs::path(o.data_dir) / "manifest.tsv";
  throw Error(Errc::ConfigError, "no manifest: pass --manifest or --data-dir (or set CLONECRAFT_DATA_DIR)");
}

std::string hex(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << v;
  return ss.str();
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw Error(Errc::IoError, "cannot write " + path.string());
  os << j.dump(2) << "\n";
}

void cmd_synth_corpus(const Options& o, const Resolved& r, std::ostream& out) {
  if (o.data_dir.empty()) throw Error(Errc::ConfigError, "synth-corpus needs --data-dir or CLONECRAFT_DATA_DIR");
  const auto m = data::generate_synthetic_corpus(o.data_dir, r.corpus);
  out << json{{"root", o.data_dir},
              {"utterances", m.size()},
              {"speakers", m.speakers().size()},
              {"test", m.subset(data::Split::Test).size()}}
             .dump()
      << "\n";
}

// <in>/<speaker>/<utterance>.wav with an optional <utterance>.txt transcript.
// The last test_per_speaker utterances of each speaker (by name, keeping at
// least one for training) go to the test split.
void cmd_ingest(const Options& o, const Resolved& r, std::ostream& out) {
  const fs::path root = o.in;
  if (!fs::is_directory(root)) throw Error(Errc::MissingAsset, "not a directory: " + root.string());
  std::vector<fs::path> speakers;
  for (const auto& d : fs::directory_iterator(root))
    if (d.is_directory()) speakers.push_back(d.path());
  std::sort(speakers.begin(), speakers.end());
  data::DatasetManifest m(root);
  for (const auto& sdir : speakers) {
    std::vector<fs::path> wavs;
    for (const auto& f : fs::directory_iterator(sdir))
      if (f.is_regular_file() && f.path().extension() == ".wav") wavs.push_back(f.path());
    std::sort(wavs.begin(), wavs.end());
    const std::size_t n_test = wavs.empty() ? 0 : std::min(r.corpus.test_per_speaker, wavs.size() - 1);
    for (std::size_t i = 0; i < wavs.size(); ++i) {
      const auto w = audio::read_wav(wavs[i]);
      std::string text;
      if (std::ifstream ts(fs::path(wavs[i]).replace_extension(".txt")); ts) {
        std::getline(ts, text);
        std::replace(text.begin(), text.end(), '\t', ' ');
        std::erase(text, '\r');
      }
      data::ManifestEntry e;
      e.speaker_id = sdir.filename().string();
      e.utterance_id = wavs[i].stem().string();
      e.audio_path = fs::relative(wavs[i], root).generic_string();
      e.transcript = text;
      e.duration_s = static_cast<double>(w.size()) / w.sample_rate;
      e.split = i + n_test >= wavs.size() ? data::Split::Test : data::Split::Train;
      m.add(std::move(e));
    }
  }
  if (m.empty()) throw Error(Errc::EmptyInput, "no <speaker>/<utterance>.wav files under " + root.string());
  const fs::path path = o.manifest.empty() ? root / "manifest.tsv" : fs::path(o.manifest);
  data::write_manifest(m, path);
  out << json{{"manifest", path.string()}, {"utterances", m.size()}, {"speakers", m.speakers().size()}}.dump()
      << "\n";
}

void cmd_train_encoder(const Options& o, const Resolved& r, std::ostream& out, std::ostream& err) {
  const auto manifest = data::load_manifest(manifest_path(o));
  const auto pool = data::load_encoder_features(manifest.subset(data::Split::Train));
  auto model = encoder::build_encoder(r.encoder, r.seed);
  err << "training " << encoder::architecture_name(r.encoder.architecture) << " encoder on " << pool.size()
      << " utterances for " << r.encoder_train.max_steps << " steps\n";
  train::EncoderTrainer trainer(model, pool, r.batch, r.encoder_train);
  const auto metrics = trainer.run(o.out_dir);
  const fs::path ckpt = fs::path(o.out_dir) / "encoder.ccpt";
  train::save_checkpoint(trainer.checkpoint(), ckpt);
  out << json{{"steps", trainer.current_step()},
              {"initial_loss", metrics.empty() ? 0.0 : metrics.front().loss},
              {"final_loss", metrics.empty() ? 0.0 : metrics.back().loss},
              {"checkpoint", ckpt.string()}}
             .dump()
      << "\n";
}

void cmd_train_synth(const Options& o, const Resolved& r, std::ostream& out, std::ostream& err) {
  const auto manifest = data::load_manifest(manifest_path(o));
  auto model = synth::Synthesizer::build(r.synthesizer, r.seed);
  err << "training synthesizer (" << synth::conditioning_name(r.synthesizer.embedding_conditioning) << ") for "
      << r.synth_train.max_steps << " steps\n";
  const auto res =
      train::train_synthesizer(model, manifest, o.encoder, r.synth_train, r.synth_batch_size, o.out_dir);
  const fs::path last = fs::path(o.out_dir) / ("ckpt_" + std::to_string(r.synth_train.max_steps) + ".ccpt");
  const fs::path ckpt = fs::path(o.out_dir) / "synthesizer.ccpt";
  fs::copy_file(last, ckpt, fs::copy_options::overwrite_existing);
  out << json{{"steps", res.metrics.empty() ? 0 : res.metrics.back().step},
              {"final_loss", res.metrics.empty() ? 0.0 : res.metrics.back().loss},
              {"encoder_hash_before", hex(res.encoder_hash_before)},
              {"encoder_hash_after", hex(res.encoder_hash_after)},
              {"checkpoint", ckpt.string()}}
             .dump()
      << "\n";
}

void cmd_embed(const Options& o, std::ostream& out) {
  const auto model = train::load_encoder(fs::path(o.encoder));
  const auto e = eval::embed_waveform(model, audio::read_wav(o.in), fs::path(o.in).stem().string());
  const fs::path path = o.out.empty() ? fs::path(o.out_dir) / (fs::path(o.in).stem().string() + ".dvec") : fs::path(o.out);
  encoder::write_dvec(path, e.values);
  double norm = 0;
  for (float v : e.values) norm += static_cast<double>(v) * v;
  out << json{{"path", path.string()}, {"dim", e.values.size()}, {"norm", std::sqrt(norm)}}.dump() << "\n";
}

void cmd_eval_eer(const Options& o, const Resolved& r, std::ostream& out) {
  const auto model = train::load_encoder(fs::path(o.encoder));
  const auto pool = data::load_encoder_features(data::load_manifest(manifest_path(o)).subset(r.split));
  const auto res = eval::sv_eer_protocol(model, pool, r.enroll_per_speaker);
  const json summary{{"eer", res.eer.eer},
                     {"threshold", res.eer.threshold},
                     {"n_genuine", res.eer.n_genuine},
                     {"n_impostor", res.eer.n_impostor},
                     {"split", data::split_name(r.split)}};
  write_json(fs::path(o.out_dir) / "eer.json", summary);
  eval::write_trials_csv(fs::path(o.out_dir) / "trials.csv", res.trials);
  out << summary.dump() << "\n";
}

void cmd_eval_similarity(const Options& o, const Resolved& r, std::ostream& out) {
  const auto enc = train::load_encoder(fs::path(o.encoder));
  const auto syn = train::load_synthesizer(fs::path(o.synth));
  const auto manifest = data::load_manifest(manifest_path(o)).subset(r.split);
  const auto set =
      eval::generate_for_similarity(enc, syn, manifest, r.similarity_per_speaker, r.inversion, r.seed);
  const auto report = eval::similarity_report(set.generated, set.groundtruth);
  const json j = report;
  write_json(fs::path(o.out_dir) / "similarity.json", j);
  eval::write_similarity_csv(fs::path(o.out_dir) / "similarity.csv", report);
  out << j.dump() << "\n";
}

void cmd_project(const Options& o, const Resolved& r, std::ostream& out) {
  const auto model = train::load_encoder(fs::path(o.encoder));
  const auto pool = data::load_encoder_features(data::load_manifest(manifest_path(o)).subset(r.split));
  std::vector<std::string> ids, speakers;
  std::vector<std::vector<float>> rows;
  for (const auto& u : pool) {
    ids.push_back(u.utterance_id);
    speakers.push_back(u.speaker_id);
    rows.push_back(encoder::embed_utterance(model, u.mel, audio::ShortInput::Padded, u.utterance_id).values);
  }
  const auto p = eval::project_2d(rows);
  eval::write_projection_csv(fs::path(o.out_dir) / "projection.csv", ids, speakers, p);
  eval::write_embeddings_csv(fs::path(o.out_dir) / "embeddings.csv", ids, speakers, rows);
  const json summary{{"points", rows.size()}, {"degenerate", p.degenerate}, {"split", data::split_name(r.split)}};
  write_json(fs::path(o.out_dir) / "projection.json", summary);
  out << summary.dump() << "\n";
}

void cmd_clone(const Options& o, const Resolved& r, std::ostream& out) {
  const auto enc = train::load_encoder(fs::path(o.encoder));
  const auto syn = train::load_synthesizer(fs::path(o.synth));
  const auto res = eval::clone_voice(enc, syn, audio::read_wav(o.ref), o.text, r.inversion, r.seed);
  const fs::path wav = o.out.empty() ? fs::path(o.out_dir) / "clone.wav" : fs::path(o.out);
  const fs::path melf = fs::path(wav).replace_extension(".melf");
  audio::write_wav(wav, res.wave);
  vocoder::export_mel(res.mel, melf);
  out << json{{"wav", wav.string()},
              {"melf", melf.string()},
              {"frames", res.mel.frames.rows()},
              {"seconds", static_cast<double>(res.wave.size()) / res.wave.sample_rate},
              {"non_converged_stop", res.non_converged_stop}}
             .dump()
      << "\n";
}

}  // namespace

json default_config() {
  const data::SyntheticCorpusConfig corpus;
  return json{
      {"seed", std::uint64_t{1}},
      {"corpus",
       {{"n_speakers", std::size_t{10}},
        {"utts_per_speaker", std::size_t{30}},
        {"test_per_speaker", std::size_t{14}},
        {"min_duration_s", corpus.min_duration_s},
        {"sample_rate", corpus.sample_rate}}},
      {"encoder", encoder::EncoderConfig{}},
      {"batch", {{"n_speakers", std::size_t{8}}, {"m_utterances", std::size_t{4}}}},
      {"encoder_train", train_defaults()},
      {"synthesizer", synth::SynthesizerConfig{}},
      {"synth_train", train_defaults()},
      {"synth_batch_size", std::size_t{4}},
      {"eval", {{"enroll_per_speaker", std::size_t{6}}, {"similarity_per_speaker", std::size_t{3}}, {"split", "test"}}},
      {"inversion",
       {{"n_iterations", std::size_t{32}},
        {"nnls_iterations", std::size_t{50}},
        {"power", 1.0},
        {"momentum", 0.99},
        {"peak", 0.95}}},
  };
}

json resolve_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides,
                    std::optional<std::uint64_t> seed) {
  json tree = default_config();
  if (file) {
    std::ifstream is(*file);
    if (!is) throw Error(Errc::ConfigError, "cannot open config " + file->string());
    const json loaded = json::parse(is, nullptr, false, true);
    if (loaded.is_discarded() || !loaded.is_object())
      throw Error(Errc::ConfigError, "config is not a JSON object: " + file->string());
    merge(tree, loaded, "");
  }
  for (const auto& kv : overrides) merge(tree, parse_override(kv), "");
  if (seed) tree["seed"] = *seed;
  return tree;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Speaker-embedding voice cloning toolkit", "clonecraft"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Print help for every subcommand");
  app.add_option("--config", o.config_path, "JSON config file layered over the defaults");
  app.add_option("--set", o.overrides, "Override one config key, e.g. --set encoder.recurrent_units=64");
  app.add_option("--seed", o.seed, "Seed for every random stream (overrides the config)");
  app.add_option("--out-dir", o.out_dir, "Directory for checkpoints, metrics and reports")->capture_default_str();
  app.add_option("--data-dir", o.data_dir, "Corpus root holding manifest.tsv")->envname("CLONECRAFT_DATA_DIR");
  app.add_option("--manifest", o.manifest, "Manifest path (default <data-dir>/manifest.tsv)");

  auto* synth_corpus = app.add_subcommand("synth-corpus", "Render the synthetic multi-speaker corpus into --data-dir");
  auto* ingest = app.add_subcommand("ingest", "Build a manifest from <in>/<speaker>/<utterance>.wav (+ .txt)");
  ingest->add_option("--in", o.in, "Corpus directory")->required();
  auto* train_enc = app.add_subcommand("train-encoder", "Train the speaker encoder on the train split");
  auto* train_syn = app.add_subcommand("train-synth", "Train the synthesizer against a frozen encoder");
  train_syn->add_option("--encoder", o.encoder, "Encoder checkpoint")->required();
  auto* embed = app.add_subcommand("embed", "Write the utterance embedding of a WAV file as DVEC");
  embed->add_option("--encoder", o.encoder, "Encoder checkpoint")->required();
  embed->add_option("--in", o.in, "Input WAV")->required();
  embed->add_option("--out", o.out, "Output DVEC (default <out-dir>/<stem>.dvec)");
  auto* eer = app.add_subcommand("eval-eer", "Speaker-verification EER on the evaluation split");
  eer->add_option("--encoder", o.encoder, "Encoder checkpoint")->required();
  auto* sim = app.add_subcommand("eval-similarity", "Generated-vs-recorded cosine similarity per speaker");
  sim->add_option("--encoder", o.encoder, "Encoder checkpoint")->required();
  sim->add_option("--synth", o.synth, "Synthesizer checkpoint")->required();
  auto* project = app.add_subcommand("project", "2-D projection and raw export of utterance embeddings");
  project->add_option("--encoder", o.encoder, "Encoder checkpoint")->required();
  auto* clone = app.add_subcommand("clone", "Speak --text in the voice of --ref");
  clone->add_option("--encoder", o.encoder, "Encoder checkpoint")->required();
  clone->add_option("--synth", o.synth, "Synthesizer checkpoint")->required();
  clone->add_option("--ref", o.ref, "Reference WAV of the target speaker")->required();
  clone->add_option("--text", o.text, "Text to speak")->required();
  clone->add_option("--out", o.out, "Output WAV (default <out-dir>/clone.wav); the mel goes next to it as .melf");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    const auto tree = resolve_config(o.config_path.empty() ? std::nullopt : std::optional<fs::path>(o.config_path),
                                     o.overrides, o.seed);
    const Resolved r = materialise(tree);
    err << "config: " << tree.dump() << "\n";
    const bool writes_out_dir = !synth_corpus->parsed() && !ingest->parsed();
    if (writes_out_dir) {
      fs::create_directories(o.out_dir);
      write_json(fs::path(o.out_dir) / "config.json", tree);
    }
    if (synth_corpus->parsed()) cmd_synth_corpus(o, r, out);
    else if (ingest->parsed()) cmd_ingest(o, r, out);
    else if (train_enc->parsed()) cmd_train_encoder(o, r, out, err);
    else if (train_syn->parsed()) cmd_train_synth(o, r, out, err);
    else if (embed->parsed()) cmd_embed(o, out);
    else if (eer->parsed()) cmd_eval_eer(o, r, out);
    else if (sim->parsed()) cmd_eval_similarity(o, r, out);
    else if (project->parsed()) cmd_project(o, r, out);
    else if (clone->parsed()) cmd_clone(o, r, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace clonecraft::cli
