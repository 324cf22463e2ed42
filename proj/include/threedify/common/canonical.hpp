#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

namespace threedify {

using json = nlohmann::json;

/// Shortest round-trip decimal of `value` rounded to at most 6 fractional
/// digits, fixed notation, with negative zero printed as "0".
std::string format_number(double value);

/// Single-line JSON with object keys in byte order and every number printed
/// through format_number. Used wherever byte equality matters (snapshots,
/// golden files, index files).
std::string canonical_dump(const json& value);

std::uint64_t fnv1a_64(std::string_view bytes);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t value);

}  // namespace threedify
