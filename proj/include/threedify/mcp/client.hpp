#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "threedify/mcp/message.hpp"
#include "threedify/mcp/server.hpp"
#include "threedify/mcp/transport.hpp"

namespace threedify::mcp {

/// The server answered a request with a JSON-RPC error.
class RemoteError : public std::runtime_error {
 public:
  explicit RemoteError(RpcError error)
      : std::runtime_error(error.message), error_(std::move(error)) {}
  const RpcError& error() const { return error_; }
  int code() const { return error_.code; }

 private:
  RpcError error_;
};

/// Misuse of the client state machine, or a peer that breaks the protocol
/// (wrong version, mismatched id).
class ClientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ToolResult {
  std::string text;
  bool is_error = false;
  json raw;
};

/// Strict request/response alternation: one request in flight at a time.
/// Not safe for concurrent use; may be moved between threads.
class Client {
 public:
  explicit Client(Transport& transport, std::string name = "threedify-client", std::string version = "0.1")
      : transport_(&transport), name_(std::move(name)), version_(std::move(version)) {}

  ServerInfo initialize();
  bool initialized() const { return initialized_; }
  const ServerInfo& server_info() const { return server_info_; }

  std::vector<ToolDescriptor> list_tools();
  ToolResult call_tool(std::string_view name, const json& arguments);
  /// Parsed JSON of the first content entry (its raw text if not JSON).
  json read_resource(std::string_view uri);

  /// Sends an arbitrary request and returns its result; used by tests to
  /// exercise error paths.
  json request(std::string method, json params);
  void notify(std::string method, json params);

 private:
  void require_ready() const;

  Transport* transport_;
  std::string name_;
  std::string version_;
  std::int64_t next_id_ = 1;
  bool initialized_ = false;
  ServerInfo server_info_;
};

}  // namespace threedify::mcp
