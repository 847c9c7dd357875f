#pragma once

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "clonecraft/nn/optim.hpp"

namespace clonecraft::train {

// Named-parameter archive with the producing config embedded.
//   "CCKP" | u32 version | str config-json | u64 step
//   | u32 n, n x (str name, u32 rows, u32 cols, f32 data)      parameters
//   | i64 optimizer steps | u32 n, n x tensor                  optimizer moments
//   | u32 n, n x (str key, str value)                          rng states
//   | u32 n, n x f64                                           loss history
// Strings are u64 length + bytes; everything little-endian.
struct Checkpoint {
  nlohmann::json config;
  long step = 0;
  std::vector<std::pair<std::string, MatrixF>> parameters;
  long optimizer_steps = 0;
  std::map<std::string, MatrixF> optimizer_state;
  std::map<std::string, std::string> rng_states;
  std::vector<double> loss_history;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
std::vector<char> serialize_checkpoint(const Checkpoint& ckpt);
// MissingAsset if absent, FormatError on bad magic / truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint deserialize_checkpoint(const std::vector<char>& bytes);

// Copies matching tensors into the parameter set; ShapeError / ConfigError on
// missing names or shape mismatch.
void restore_parameters(nn::ParameterSet& params, const Checkpoint& ckpt, const std::string& prefix = {});
void append_parameters(Checkpoint& ckpt, const nn::ParameterSet& params, const std::string& prefix = {});

std::string rng_to_string(const std::mt19937_64& rng);
void rng_from_string(std::mt19937_64& rng, const std::string& state);

}  // namespace clonecraft::train
