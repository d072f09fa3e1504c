#pragma once

// Serialization helpers shared by the CLI and the Python bindings.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cqosc/errors.hpp"
#include "cqosc/mpp.hpp"

namespace cqosc::io {

using nlohmann::json;

/// Shortest round-trip-safe decimal form (17 significant digits).
std::string decimal(double x);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

json to_json(const model::OscillatorConfig& cfg);
json to_json(const model::TimeGrid& grid);
json to_json(const mpp::MppSolution& sol);
json error_json(const Error& e);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace cqosc::io
