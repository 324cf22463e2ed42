#include "threedify/dcc/dcc_server.hpp"

namespace threedify::dcc {

std::string SceneStore::run(std::string_view script) {
  std::lock_guard lock(mutex_);
  auto outcome = run_script(scene_, script);
  scene_ = std::move(outcome.scene);
  return std::move(outcome.text);
}

Scene SceneStore::scene() const {
  std::lock_guard lock(mutex_);
  return scene_;
}

json shortcut_keys() {
  return {{"add", "Shift+A"},    {"delete", "X"}, {"duplicate", "Shift+D"}, {"grab", "G"},
          {"redo", "Ctrl+Shift+Z"}, {"rotate", "R"}, {"scale", "S"},           {"undo", "Ctrl+Z"}};
}

mcp::ToolRegistry make_dcc_registry(std::shared_ptr<SceneStore> store) {
  mcp::ToolRegistry registry;
  registry.add_tool(
      {"run_cmd_on_default_console",
       "Execute command on DCC's default console. One command per line: add <kind> <name> [k=v ...] | "
       "set <obj>.<param> <value> | link <obj>.<param> = <expr> | delete <name> | query <name> | snapshot | "
       "render_summary. Lines run as one transaction.",
       {{"cmd", {"string", "Console command line(s) to execute", true}}}},
      [store](const json& args) { return store->run(args.at("cmd").get<std::string>()); });
  registry.add_tool({"get_scene_snapshot", "Return the canonical scene/1 JSON snapshot of the current scene", {}},
                    [store](const json&) { return snapshot(store->scene()); });
  registry.add_tool({"render_summary", "Return a one-line summary of the objects in the current scene", {}},
                    [store](const json&) { return dcc::render_summary(store->scene()); });
  registry.add_resource({"shortcut://keys", "Get activated shortcut key list"}, [] { return shortcut_keys(); });
  return registry;
}

mcp::Server make_dcc_server(std::shared_ptr<SceneStore> store) {
  return mcp::Server({std::string(kServerName), std::string(kServerVersion)}, make_dcc_registry(std::move(store)));
}

void serve_dcc_mcp(std::shared_ptr<SceneStore> store, mcp::Transport& transport) {
  make_dcc_server(std::move(store)).serve(transport);
}

}  // namespace threedify::dcc
