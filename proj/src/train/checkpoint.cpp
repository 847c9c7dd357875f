#include "clonecraft/train/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace clonecraft::train {
namespace {

constexpr char kMagic[4] = {'C', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const MatrixF& m) {
    str(name);
    pod<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    pod<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    bytes(m.data(), m.size() * sizeof(float));
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(const std::vector<char>& b) : b_(b) {}
  void bytes(void* p, std::size_t n) {
    if (n > b_.size() - pos_) throw Error(Errc::FormatError, "truncated checkpoint");
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
  }
  template <class T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > b_.size() - pos_) throw Error(Errc::FormatError, "truncated checkpoint string");
    std::string s(b_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::pair<std::string, MatrixF> tensor() {
    std::string name = str();
    const auto r = pod<std::uint32_t>();
    const auto c = pod<std::uint32_t>();
    if (static_cast<std::uint64_t>(r) * c * 4 > b_.size() - pos_) throw Error(Errc::FormatError, "truncated tensor");
    MatrixF m(r, c);
    bytes(m.data(), m.size() * sizeof(float));
    return {std::move(name), std::move(m)};
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::vector<char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<char> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.pod<std::uint32_t>(kVersion);
  w.str(ckpt.config.dump());
  w.pod<std::int64_t>(ckpt.step);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.parameters.size()));
  for (const auto& [name, m] : ckpt.parameters) w.tensor(name, m);
  w.pod<std::int64_t>(ckpt.optimizer_steps);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.optimizer_state.size()));
  for (const auto& [name, m] : ckpt.optimizer_state) w.tensor(name, m);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.rng_states.size()));
  for (const auto& [k, v] : ckpt.rng_states) {
    w.str(k);
    w.str(v);
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.loss_history.size()));
  for (double l : ckpt.loss_history) w.pod<double>(l);
  return std::move(w.buffer());
}

Checkpoint deserialize_checkpoint(const std::vector<char>& bytes) {
  Reader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(Errc::FormatError, "not a checkpoint (bad magic)");
  if (r.pod<std::uint32_t>() != kVersion) throw Error(Errc::FormatError, "unsupported checkpoint version");
  Checkpoint c;
  try {
    c.config = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::FormatError, std::string("checkpoint config: ") + e.what());
  }
  c.step = static_cast<long>(r.pod<std::int64_t>());
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) c.parameters.push_back(r.tensor());
  c.optimizer_steps = static_cast<long>(r.pod<std::int64_t>());
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) c.optimizer_state.insert(r.tensor());
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) {
    std::string k = r.str();
    c.rng_states[k] = r.str();
  }
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) c.loss_history.push_back(r.pod<double>());
  if (!r.done()) throw Error(Errc::FormatError, "trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingAsset, "cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

void restore_parameters(nn::ParameterSet& params, const Checkpoint& ckpt, const std::string& prefix) {
  for (auto& e : params.entries()) {
    const std::string key = prefix + e.name;
    const MatrixF* found = nullptr;
    for (const auto& [name, m] : ckpt.parameters)
      if (name == key) found = &m;
    if (!found) throw Error(Errc::ConfigMismatch, "checkpoint lacks parameter " + key);
    if (!found->same_shape(e.var.value())) throw Error(Errc::ConfigMismatch, "shape mismatch for " + key);
    e.var.mutable_value() = *found;
  }
}

void append_parameters(Checkpoint& ckpt, const nn::ParameterSet& params, const std::string& prefix) {
  for (const auto& e : params.entries()) ckpt.parameters.emplace_back(prefix + e.name, e.var.value());
}

std::string rng_to_string(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void rng_from_string(std::mt19937_64& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw Error(Errc::FormatError, "bad rng state in checkpoint");
}

}  // namespace clonecraft::train
