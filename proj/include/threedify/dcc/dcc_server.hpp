#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "threedify/dcc/scene.hpp"
#include "threedify/mcp/server.hpp"

namespace threedify::dcc {

inline constexpr std::string_view kServerName = "3Dify-MCP-Server";
inline constexpr std::string_view kServerVersion = "0.1";

/// The simulator's console: owns one scene and applies scripts to it.
class SceneStore {
 public:
  SceneStore() = default;
  explicit SceneStore(Scene scene) : scene_(std::move(scene)) {}

  /// Runs a console script as one transaction and returns its result text.
  std::string run(std::string_view script);
  Scene scene() const;

 private:
  mutable std::mutex mutex_;
  Scene scene_;
};

/// Active shortcut bindings of the simulated tool.
json shortcut_keys();

/// Tools run_cmd_on_default_console, get_scene_snapshot, render_summary and
/// the shortcut://keys resource, all bound to `store`.
mcp::ToolRegistry make_dcc_registry(std::shared_ptr<SceneStore> store);

mcp::Server make_dcc_server(std::shared_ptr<SceneStore> store);

/// Serves a fresh scene over `transport` until it closes.
void serve_dcc_mcp(std::shared_ptr<SceneStore> store, mcp::Transport& transport);

}  // namespace threedify::dcc
