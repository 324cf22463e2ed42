#pragma once

#include <string>
#include <vector>

#include "threedify/mcp/transport.hpp"

namespace threedify::dcc {

/// Drives a fixed client session against a DCC MCP server on a fresh
/// connection: handshake, discovery, the shortcut resource, a scripted
/// build with queries, and protocol and tool error paths. Returns the
/// transcript, one "> sent" or "< received" line per message.
std::vector<std::string> run_conformance_session(mcp::Transport& transport);

/// Requests (messages carrying an id) sent by run_conformance_session.
std::size_t conformance_request_count(const std::vector<std::string>& transcript);

}  // namespace threedify::dcc
