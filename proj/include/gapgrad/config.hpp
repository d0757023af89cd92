#pragma once

// TOML (via toml++) converted to JSON, so that TOML and JSON configs share one
// code path.

#include <filesystem>
#include <string_view>

#include "json.hpp"

namespace gapgrad {

/// Throws InputError with the offending line number.
nlohmann::json parse_toml(std::string_view text);

/// JSON when the file ends in .json or starts with '{', TOML otherwise.
nlohmann::json load_config_file(const std::filesystem::path& path);

}  // namespace gapgrad
