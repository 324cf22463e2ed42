#include "threedify/mcp/message.hpp"

#include <cstdint>

namespace threedify::mcp {

std::string_view error_name(int code) {
  switch (code) {
    case error_code::parse_error: return "parse_error";
    case error_code::invalid_request: return "invalid_request";
    case error_code::method_not_found: return "method_not_found";
    case error_code::invalid_params: return "invalid_params";
    case error_code::internal_error: return "internal_error";
    case error_code::handler_failed: return "handler_failed";
    case error_code::unknown_tool: return "unknown_tool";
    case error_code::unknown_resource: return "unknown_resource";
    case error_code::not_initialized: return "not_initialized";
    case error_code::already_initialized: return "already_initialized";
    case error_code::unsupported_version: return "unsupported_version";
    default: return "";
  }
}

Message Message::request(std::int64_t id, std::string method, json params) {
  Message m;
  m.kind = Kind::request;
  m.id = id;
  m.method = std::move(method);
  m.params = std::move(params);
  return m;
}

Message Message::notification(std::string method, json params) {
  Message m;
  m.kind = Kind::notification;
  m.method = std::move(method);
  m.params = std::move(params);
  return m;
}

Message Message::response(std::int64_t id, json result) {
  Message m;
  m.kind = Kind::response;
  m.id = id;
  m.result = std::move(result);
  return m;
}

Message Message::failure(std::optional<std::int64_t> id, RpcError error) {
  Message m;
  m.kind = Kind::error_response;
  m.id = id;
  m.error = std::move(error);
  return m;
}

std::string encode_message(const Message& msg) {
  json j = {{"jsonrpc", "2.0"}};
  switch (msg.kind) {
    case Message::Kind::request:
      j["id"] = msg.id.value_or(0);
      j["method"] = msg.method;
      j["params"] = msg.params;
      break;
    case Message::Kind::notification:
      j["method"] = msg.method;
      j["params"] = msg.params;
      break;
    case Message::Kind::response:
      j["id"] = msg.id.value_or(0);
      j["result"] = msg.result;
      break;
    case Message::Kind::error_response: {
      j["id"] = msg.id ? json(*msg.id) : json(nullptr);
      json err = {{"code", msg.error.code}, {"message", msg.error.message}};
      if (msg.error.data) err["data"] = *msg.error.data;
      j["error"] = std::move(err);
      break;
    }
  }
  // dump() escapes control characters, so the line never holds a raw newline.
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

namespace {

[[noreturn]] void invalid(std::string message, std::optional<std::int64_t> id = std::nullopt) {
  throw ProtocolError(RpcError{error_code::invalid_request, std::move(message), std::nullopt}, id);
}

std::optional<std::int64_t> integer_id(const json& id) {
  if (id.is_number_integer()) {
    if (id.is_number_unsigned() && id.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      return std::nullopt;
    }
    return id.get<std::int64_t>();
  }
  return std::nullopt;
}

}  // namespace

Message decode_message(std::string_view line) {
  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded()) {
    throw ProtocolError(RpcError{error_code::parse_error, "parse error", std::nullopt});
  }
  if (!j.is_object()) invalid("message must be a JSON object");

  std::optional<std::int64_t> id;
  bool has_id = false;
  if (auto it = j.find("id"); it != j.end() && !it->is_null()) {
    id = integer_id(*it);
    if (!id) invalid("id must be an integer");
    has_id = true;
  }
  auto version = j.find("jsonrpc");
  if (version == j.end() || *version != "2.0") invalid("jsonrpc must be \"2.0\"", id);

  const bool has_method = j.contains("method");
  const bool has_result = j.contains("result");
  const bool has_error = j.contains("error");
  if (static_cast<int>(has_method) + static_cast<int>(has_result) + static_cast<int>(has_error) != 1) {
    invalid("exactly one of method, result, error is required", id);
  }

  if (has_method) {
    const auto& method = j["method"];
    if (!method.is_string()) invalid("method must be a string", id);
    json params = json::object();
    if (auto it = j.find("params"); it != j.end()) {
      if (!it->is_object() && !it->is_array()) invalid("params must be an object or array", id);
      params = *it;
    }
    if (j.contains("id") && !has_id) invalid("request id must not be null");
    return has_id ? Message::request(*id, method.get<std::string>(), std::move(params))
                  : Message::notification(method.get<std::string>(), std::move(params));
  }

  if (has_result) {
    if (!has_id) invalid("response requires an integer id");
    return Message::response(*id, j["result"]);
  }

  const auto& err = j["error"];
  if (!err.is_object()) invalid("error must be an object", id);
  auto code = err.find("code");
  auto message = err.find("message");
  if (code == err.end() || !code->is_number_integer() || message == err.end() || !message->is_string()) {
    invalid("error requires integer code and string message", id);
  }
  const auto raw_code = code->get<std::int64_t>();
  if (raw_code < INT32_MIN || raw_code > INT32_MAX) invalid("error code out of range", id);
  RpcError rpc{static_cast<int>(raw_code), message->get<std::string>(), std::nullopt};
  if (auto data = err.find("data"); data != err.end()) rpc.data = *data;
  return Message::failure(id, std::move(rpc));
}

}  // namespace threedify::mcp
