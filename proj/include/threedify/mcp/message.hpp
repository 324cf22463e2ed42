#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "threedify/common/canonical.hpp"

namespace threedify::mcp {

inline constexpr std::string_view kProtocolVersion = "2024-11-05";

/// JSON-RPC 2.0 reserved codes plus the application range used by this stack.
namespace error_code {
inline constexpr int parse_error = -32700;
inline constexpr int invalid_request = -32600;
inline constexpr int method_not_found = -32601;
inline constexpr int invalid_params = -32602;
inline constexpr int internal_error = -32603;

inline constexpr int handler_failed = -32000;
inline constexpr int unknown_tool = -32001;
inline constexpr int unknown_resource = -32002;
inline constexpr int not_initialized = -32003;
inline constexpr int already_initialized = -32004;
inline constexpr int unsupported_version = -32005;
}  // namespace error_code

/// Stable symbolic name for a code, e.g. "unknown_tool". Empty for codes
/// outside the documented set.
std::string_view error_name(int code);

struct RpcError {
  int code = 0;
  std::string message;
  std::optional<json> data;

  friend bool operator==(const RpcError&, const RpcError&) = default;
};

struct Message {
  enum class Kind { request, notification, response, error_response };

  Kind kind = Kind::request;
  /// Absent for notifications and for error responses to unparseable input.
  std::optional<std::int64_t> id;
  std::string method;
  json params = json::object();
  json result;
  RpcError error;

  static Message request(std::int64_t id, std::string method, json params = json::object());
  static Message notification(std::string method, json params = json::object());
  static Message response(std::int64_t id, json result);
  static Message failure(std::optional<std::int64_t> id, RpcError error);

  friend bool operator==(const Message&, const Message&) = default;
};

/// Thrown by decode_message; `id` is recovered when the line was valid JSON
/// carrying an integer id.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(RpcError error, std::optional<std::int64_t> id = std::nullopt)
      : std::runtime_error(error.message), error_(std::move(error)), id_(id) {}

  const RpcError& error() const { return error_; }
  int code() const { return error_.code; }
  std::optional<std::int64_t> id() const { return id_; }

 private:
  RpcError error_;
  std::optional<std::int64_t> id_;
};

/// One line of UTF-8 JSON, no trailing newline. Object keys are sorted so
/// output is byte-stable.
std::string encode_message(const Message& msg);

Message decode_message(std::string_view line);

}  // namespace threedify::mcp
