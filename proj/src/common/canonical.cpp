#include "threedify/common/canonical.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace threedify {

std::string format_number(double value) {
  if (!std::isfinite(value)) {
    throw std::invalid_argument("cannot format non-finite number");
  }
  double rounded = std::round(value * 1e6) / 1e6;
  // Large magnitudes lose nothing to rounding; scaling them could overflow.
  if (std::fabs(value) >= 1e15) rounded = value;
  if (rounded == 0.0) rounded = 0.0;  // drops the sign of -0

  std::array<char, 400> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), rounded,
                                 std::chars_format::fixed);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf.data(), end);
}

namespace {

void dump_into(const json& value, std::string& out) {
  switch (value.type()) {
    case json::value_t::object: {
      out.push_back('{');
      bool first = true;
      // nlohmann::json objects are std::map backed, iteration is sorted.
      for (const auto& [key, item] : value.items()) {
        if (!first) out.push_back(',');
        first = false;
        out += json(key).dump();
        out.push_back(':');
        dump_into(item, out);
      }
      out.push_back('}');
      break;
    }
    case json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : value) {
        if (!first) out.push_back(',');
        first = false;
        dump_into(item, out);
      }
      out.push_back(']');
      break;
    }
    case json::value_t::number_float:
      out += format_number(value.get<double>());
      break;
    case json::value_t::string:
      out += value.dump(-1, ' ', false, json::error_handler_t::replace);
      break;
    default:
      out += value.dump();
      break;
  }
}

}  // namespace

std::string canonical_dump(const json& value) {
  std::string out;
  dump_into(value, out);
  return out;
}

std::uint64_t fnv1a_64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace threedify
