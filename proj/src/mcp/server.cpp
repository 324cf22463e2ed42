#include "threedify/mcp/server.hpp"

#include <algorithm>
#include <thread>

namespace threedify::mcp {

namespace {

class MethodError : public std::runtime_error {
 public:
  MethodError(int code, std::string message, std::optional<json> data = std::nullopt)
      : std::runtime_error(message), error{code, std::move(message), std::move(data)} {}
  RpcError error;
};

bool type_matches(const std::string& type, const json& value) {
  if (type == "string") return value.is_string();
  if (type == "number") return value.is_number();
  if (type == "integer") return value.is_number_integer();
  if (type == "boolean") return value.is_boolean();
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  return true;
}

}  // namespace

json ToolDescriptor::to_json() const {
  json properties = json::object();
  json required = json::array();
  for (const auto& [name, spec] : input_schema) {
    properties[name] = {{"type", spec.type}, {"description", spec.description}};
    if (spec.required) required.push_back(name);
  }
  return {{"name", name},
          {"description", description},
          {"inputSchema", {{"type", "object"}, {"properties", properties}, {"required", required}}}};
}

ToolDescriptor ToolDescriptor::from_json(const json& j) {
  ToolDescriptor d;
  d.name = j.at("name").get<std::string>();
  d.description = j.value("description", "");
  const auto& schema = j.at("inputSchema");
  std::vector<std::string> required;
  if (schema.contains("required")) required = schema["required"].get<std::vector<std::string>>();
  if (schema.contains("properties")) {
    for (const auto& [name, prop] : schema["properties"].items()) {
      ParamSpec spec{prop.value("type", ""), prop.value("description", ""), false};
      spec.required = std::find(required.begin(), required.end(), name) != required.end();
      d.input_schema.emplace(name, std::move(spec));
    }
  }
  return d;
}

void ToolRegistry::add_tool(ToolDescriptor descriptor, ToolHandler handler) {
  if (frozen_) throw std::logic_error("registry is frozen");
  if (descriptor.name.empty()) throw std::invalid_argument("tool name must not be empty");
  if (descriptor.description.empty()) {
    throw std::invalid_argument("tool '" + descriptor.name + "' needs a description");
  }
  if (tool_index_.count(descriptor.name)) {
    throw std::invalid_argument("duplicate tool '" + descriptor.name + "'");
  }
  tool_index_.emplace(descriptor.name, tools_.size());
  tools_.push_back(std::move(descriptor));
  tool_handlers_.push_back(std::move(handler));
}

void ToolRegistry::add_resource(ResourceDescriptor descriptor, ResourceHandler handler) {
  if (frozen_) throw std::logic_error("registry is frozen");
  if (resource_index_.count(descriptor.uri)) {
    throw std::invalid_argument("duplicate resource '" + descriptor.uri + "'");
  }
  resource_index_.emplace(descriptor.uri, resources_.size());
  resources_.push_back(std::move(descriptor));
  resource_handlers_.push_back(std::move(handler));
}

const ToolHandler* ToolRegistry::find_tool(const std::string& name, const ToolDescriptor** descriptor) const {
  auto it = tool_index_.find(name);
  if (it == tool_index_.end()) return nullptr;
  if (descriptor) *descriptor = &tools_[it->second];
  return &tool_handlers_[it->second];
}

const ResourceHandler* ToolRegistry::find_resource(const std::string& uri) const {
  auto it = resource_index_.find(uri);
  return it == resource_index_.end() ? nullptr : &resource_handlers_[it->second];
}

std::string validate_arguments(const ToolDescriptor& tool, const json& args) {
  if (!args.is_object()) return "arguments must be an object";
  for (const auto& [name, spec] : tool.input_schema) {
    auto it = args.find(name);
    if (it == args.end()) {
      if (spec.required) return "missing required argument '" + name + "'";
      continue;
    }
    if (!type_matches(spec.type, *it)) return "argument '" + name + "' must be of type " + spec.type;
  }
  for (const auto& [name, value] : args.items()) {
    if (!tool.input_schema.count(name)) return "unexpected argument '" + name + "'";
  }
  return {};
}

Server::Server(ServerInfo info, ToolRegistry registry)
    : info_(std::move(info)),
      registry_(std::make_shared<const ToolRegistry>([&] {
        registry.freeze();
        return std::move(registry);
      }())) {}

std::optional<std::string> Server::Connection::handle_line(std::string_view line) {
  Message msg;
  try {
    msg = decode_message(line);
  } catch (const ProtocolError& e) {
    return encode_message(Message::failure(e.id(), e.error()));
  }
  auto reply = handle(msg);
  if (!reply) return std::nullopt;
  return encode_message(*reply);
}

std::optional<Message> Server::Connection::handle(const Message& msg) {
  // Notifications and stray responses never get a reply.
  if (msg.kind != Message::Kind::request) return std::nullopt;
  try {
    return Message::response(*msg.id, dispatch(msg));
  } catch (const MethodError& e) {
    return Message::failure(msg.id, e.error);
  } catch (const std::exception& e) {
    return Message::failure(msg.id, RpcError{error_code::internal_error, e.what(), std::nullopt});
  }
}

json Server::Connection::dispatch(const Message& msg) {
  const auto& method = msg.method;
  const auto& params = msg.params;
  const auto& registry = server_->registry();

  if (method == "initialize") {
    if (initialized_) throw MethodError(error_code::already_initialized, "already initialized");
    if (!params.is_object()) throw MethodError(error_code::invalid_params, "params must be an object");
    const auto version = params.value("protocolVersion", std::string{});
    if (version != server_->info().protocol_version) {
      throw MethodError(error_code::unsupported_version, "unsupported protocol version '" + version + "'",
                        json{{"supported", json::array({server_->info().protocol_version})}});
    }
    initialized_ = true;
    return {{"protocolVersion", server_->info().protocol_version},
            {"serverInfo", {{"name", server_->info().name}, {"version", server_->info().version}}},
            {"capabilities", {{"tools", json::object()}, {"resources", json::object()}}}};
  }

  const bool known = method == "tools/list" || method == "tools/call" || method == "resources/read";
  if (!known) throw MethodError(error_code::method_not_found, "method not found: " + method);
  if (!initialized_) throw MethodError(error_code::not_initialized, "initialize must come first");
  if (!params.is_object()) throw MethodError(error_code::invalid_params, "params must be an object");

  if (method == "tools/list") {
    json tools = json::array();
    for (const auto& tool : registry.tools()) tools.push_back(tool.to_json());
    return {{"tools", std::move(tools)}};
  }

  if (method == "tools/call") {
    auto name = params.find("name");
    if (name == params.end() || !name->is_string()) {
      throw MethodError(error_code::invalid_params, "tools/call requires a string 'name'");
    }
    const json args = params.value("arguments", json::object());
    const ToolDescriptor* descriptor = nullptr;
    const auto* handler = registry.find_tool(name->get<std::string>(), &descriptor);
    if (!handler) throw MethodError(error_code::unknown_tool, "unknown tool '" + name->get<std::string>() + "'");
    if (auto problem = validate_arguments(*descriptor, args); !problem.empty()) {
      throw MethodError(error_code::invalid_params, problem);
    }
    std::string text;
    try {
      text = (*handler)(args);
    } catch (const std::exception& e) {
      throw MethodError(error_code::handler_failed, e.what());
    }
    return {{"content", json::array({{{"type", "text"}, {"text", std::move(text)}}})}, {"isError", false}};
  }

  // resources/read
  auto uri = params.find("uri");
  if (uri == params.end() || !uri->is_string()) {
    throw MethodError(error_code::invalid_params, "resources/read requires a string 'uri'");
  }
  const auto* handler = registry.find_resource(uri->get<std::string>());
  if (!handler) throw MethodError(error_code::unknown_resource, "unknown resource '" + uri->get<std::string>() + "'");
  json value;
  try {
    value = (*handler)();
  } catch (const std::exception& e) {
    throw MethodError(error_code::handler_failed, e.what());
  }
  return {{"contents", json::array({{{"uri", *uri},
                                     {"mimeType", "application/json"},
                                     {"text", value.dump(-1, ' ', false, json::error_handler_t::replace)}}})}};
}

void Server::serve(Transport& transport) const {
  auto connection = connect();
  while (auto line = transport.receive()) {
    if (line->find_first_not_of(" \t\r") == std::string::npos) continue;
    if (auto reply = connection.handle_line(*line)) {
      try {
        transport.send(*reply);
      } catch (const TransportClosed&) {
        return;
      }
    }
  }
}

void serve_tcp(const Server& server, TcpListener& listener) {
  std::vector<std::thread> workers;
  while (auto transport = listener.accept()) {
    workers.emplace_back([&server, t = std::move(transport)]() mutable { server.serve(*t); });
  }
  for (auto& w : workers) w.join();
}

void LoopbackTransport::send(std::string_view line) {
  if (closed_) throw TransportClosed();
  if (auto reply = connection_.handle_line(line)) pending_.push_back(std::move(*reply));
}

std::optional<std::string> LoopbackTransport::receive() {
  if (pending_.empty()) return std::nullopt;
  auto line = std::move(pending_.front());
  pending_.pop_front();
  return line;
}

}  // namespace threedify::mcp
