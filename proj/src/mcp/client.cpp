#include "threedify/mcp/client.hpp"

namespace threedify::mcp {

json Client::request(std::string method, json params) {
  const auto id = next_id_++;
  transport_->send(encode_message(Message::request(id, std::move(method), std::move(params))));
  for (;;) {
    auto line = transport_->receive();
    if (!line) throw TransportClosed("transport closed while awaiting response " + std::to_string(id));
    Message reply = decode_message(*line);
    if (reply.kind == Message::Kind::notification) continue;
    if (reply.kind == Message::Kind::request) {
      throw ClientError("server-initiated requests are not supported");
    }
    if (reply.id != id) {
      // An error about an unparseable request carries a null id.
      if (reply.kind == Message::Kind::error_response && !reply.id) throw RemoteError(reply.error);
      throw ClientError("response id does not match the pending request " + std::to_string(id));
    }
    if (reply.kind == Message::Kind::error_response) throw RemoteError(reply.error);
    return std::move(reply.result);
  }
}

void Client::notify(std::string method, json params) {
  transport_->send(encode_message(Message::notification(std::move(method), std::move(params))));
}

ServerInfo Client::initialize() {
  if (initialized_) throw ClientError("already initialized");
  auto result = request("initialize", {{"protocolVersion", kProtocolVersion},
                                       {"clientInfo", {{"name", name_}, {"version", version_}}},
                                       {"capabilities", json::object()}});
  ServerInfo info;
  info.protocol_version = result.value("protocolVersion", "");
  if (info.protocol_version != kProtocolVersion) {
    throw ClientError("protocol version mismatch: server speaks '" + info.protocol_version + "'");
  }
  const auto& server = result.at("serverInfo");
  info.name = server.value("name", "");
  info.version = server.value("version", "");
  notify("notifications/initialized", json::object());
  initialized_ = true;
  server_info_ = info;
  return info;
}

void Client::require_ready() const {
  if (!initialized_) throw ClientError("client is not initialized");
}

std::vector<ToolDescriptor> Client::list_tools() {
  require_ready();
  auto result = request("tools/list", json::object());
  std::vector<ToolDescriptor> out;
  for (const auto& tool : result.at("tools")) out.push_back(ToolDescriptor::from_json(tool));
  return out;
}

ToolResult Client::call_tool(std::string_view name, const json& arguments) {
  require_ready();
  auto result = request("tools/call", {{"name", name}, {"arguments", arguments}});
  ToolResult out;
  out.is_error = result.value("isError", false);
  for (const auto& item : result.value("content", json::array())) {
    if (item.value("type", "") == "text") {
      if (!out.text.empty()) out.text.push_back('\n');
      out.text += item.value("text", "");
    }
  }
  out.raw = std::move(result);
  return out;
}

json Client::read_resource(std::string_view uri) {
  require_ready();
  auto result = request("resources/read", {{"uri", uri}});
  const auto& contents = result.at("contents");
  if (contents.empty()) return nullptr;
  const auto text = contents[0].value("text", "");
  auto parsed = json::parse(text, nullptr, false);
  return parsed.is_discarded() ? json(text) : parsed;
}

}  // namespace threedify::mcp
