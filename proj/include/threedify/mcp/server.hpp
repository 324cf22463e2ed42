#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "threedify/mcp/message.hpp"
#include "threedify/mcp/transport.hpp"

namespace threedify::mcp {

struct ParamSpec {
  std::string type;  // JSON Schema primitive: string, number, integer, boolean, object, array
  std::string description;
  bool required = false;

  friend bool operator==(const ParamSpec&, const ParamSpec&) = default;
};

struct ToolDescriptor {
  std::string name;
  std::string description;
  std::map<std::string, ParamSpec> input_schema;

  /// MCP `tools/list` entry: {name, description, inputSchema}.
  json to_json() const;
  static ToolDescriptor from_json(const json& j);

  friend bool operator==(const ToolDescriptor&, const ToolDescriptor&) = default;
};

struct ResourceDescriptor {
  std::string uri;
  std::string description;
};

struct ServerInfo {
  std::string name;
  std::string version;
  std::string protocol_version{kProtocolVersion};

  friend bool operator==(const ServerInfo&, const ServerInfo&) = default;
};

/// Returns the text content of the tool result. Throwing fails the call with
/// handler_failed; the serving loop continues.
using ToolHandler = std::function<std::string(const json& args)>;
using ResourceHandler = std::function<json()>;

class ToolRegistry {
 public:
  void add_tool(ToolDescriptor descriptor, ToolHandler handler);
  void add_resource(ResourceDescriptor descriptor, ResourceHandler handler);

  /// After this every add_* throws std::logic_error.
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  const std::vector<ToolDescriptor>& tools() const { return tools_; }
  const std::vector<ResourceDescriptor>& resources() const { return resources_; }

  const ToolHandler* find_tool(const std::string& name, const ToolDescriptor** descriptor = nullptr) const;
  const ResourceHandler* find_resource(const std::string& uri) const;

 private:
  bool frozen_ = false;
  std::vector<ToolDescriptor> tools_;
  std::vector<ToolHandler> tool_handlers_;
  std::map<std::string, std::size_t> tool_index_;
  std::vector<ResourceDescriptor> resources_;
  std::vector<ResourceHandler> resource_handlers_;
  std::map<std::string, std::size_t> resource_index_;
};

/// Checks `args` against a tool's input schema; returns an empty string when
/// valid, otherwise a message naming the offending argument.
std::string validate_arguments(const ToolDescriptor& tool, const json& args);

class Server {
 public:
  Server(ServerInfo info, ToolRegistry registry);

  const ServerInfo& info() const { return info_; }
  const ToolRegistry& registry() const { return *registry_; }

  /// Per-connection protocol state (initialized or not). Requests on one
  /// connection are handled strictly in order.
  class Connection {
   public:
    explicit Connection(const Server& server) : server_(&server) {}

    /// Encoded response, or nullopt for notifications.
    std::optional<std::string> handle_line(std::string_view line);
    std::optional<Message> handle(const Message& msg);

    bool initialized() const { return initialized_; }

   private:
    json dispatch(const Message& msg);

    const Server* server_;
    bool initialized_ = false;
  };

  Connection connect() const { return Connection(*this); }

  /// Serves one connection until the transport reaches end of stream.
  void serve(Transport& transport) const;

 private:
  ServerInfo info_;
  std::shared_ptr<const ToolRegistry> registry_;
};

/// Accepts connections until the listener is closed, one thread per
/// connection.
void serve_tcp(const Server& server, TcpListener& listener);

/// In-process transport whose peer is a Server connection; responses are
/// produced synchronously inside send().
class LoopbackTransport : public Transport {
 public:
  explicit LoopbackTransport(const Server& server) : connection_(server.connect()) {}

  void send(std::string_view line) override;
  std::optional<std::string> receive() override;
  void close() override { closed_ = true; }

 private:
  Server::Connection connection_;
  std::deque<std::string> pending_;
  bool closed_ = false;
};

}  // namespace threedify::mcp
