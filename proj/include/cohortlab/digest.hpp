#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace cohortlab {

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Digest of the canonical serialization of a JSON value (sorted keys,
/// shortest round-trip doubles, no whitespace).
std::string json_digest(const nlohmann::json& value);

/// Returns a copy of `value` with every object member named "timestamp"
/// or "elapsed_seconds" removed, recursively.
nlohmann::json strip_volatile(const nlohmann::json& value);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace cohortlab
