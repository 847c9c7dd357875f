#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace clonecraft::cli {

// The full tree of recognised config keys with their defaults.
nlohmann::json default_config();

// defaults <- file <- key=value overrides <- seed. Keys absent from the
// defaults tree and values of the wrong kind are ConfigError.
nlohmann::json resolve_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides, std::optional<std::uint64_t> seed);

// Exit codes: 0 success, 2 usage or config errors, 1 runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace clonecraft::cli
