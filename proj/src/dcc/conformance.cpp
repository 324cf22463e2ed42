#include "threedify/dcc/conformance.hpp"

#include "threedify/mcp/client.hpp"

namespace threedify::dcc {

namespace {

const char* const kBuild[] = {
    "add group pc",
    "add cube case width=0.45 depth=0.2 height=0.45",
    "add plane side_panel width=0.45 height=0.45",
    "set side_panel.loc_x 0.1",
    "delete side_panel",
    "add cube motherboard width=0.3 height=0.3 depth=0.02",
    "link motherboard.loc_y = case.depth * 0.4",
    "add cube gpu width=0.28 height=0.05 depth=0.12",
    "link gpu.loc_z = case.height * 0.35",
    "add cube psu width=0.15 height=0.09 depth=0.14",
    "link psu.loc_z = case.height * 0.1",
    "add cylinder fan_front radius=0.06 depth=0.025",
    "add cylinder fan_rear radius=0.06 depth=0.025",
    "add cylinder cpu_cooler radius=0.05 depth=0.07",
    "link cpu_cooler.loc_z = case.height * 0.7",
    "add light glow intensity=2",
    "set fan_front.emission_strength 3",
    "set fan_front.emission_color \"#00c8ff\"",
    "set fan_rear.emission_strength 3",
    "set fan_rear.emission_color \"#ff2fa0\"",
    "set case.height 0.5",
    "query gpu",
    "query psu",
    "query cpu_cooler",
    "link case.height = gpu.loc_z * 2",
    "set gpu.width -1",
    "add cube case",
    "add sphere ball",
    "add cube 9lives",
    "set ghost.width 1",
    "link gpu.loc_x = missing.width + 1",
    "query ghost",
    "add cube ram_a width=0.01 height=0.13 depth=0.03",
    "add cube ram_b width=0.01 height=0.13 depth=0.03",
    "link ram_b.loc_x = ram_a.loc_x + 0.012",
    "set ram_a.loc_x 0.05",
    "query ram_b",
    "add cube ssd width=0.08 height=0.02 depth=0.07",
    "set ssd.rot_z 90",
    "add cube cable_bar width=0.3 height=0.01 depth=0.01",
    "link cable_bar.loc_z = psu.loc_z + psu.height",
    "query cable_bar",
    "snapshot",
    "render_summary",
    "set case.width 0.5",
    "query case",
    "delete ssd",
    "query ssd",
    "add cube ssd width=0.08 height=0.02 depth=0.07",
    "set ssd.loc_y 0.02",
};

}  // namespace

std::vector<std::string> run_conformance_session(mcp::Transport& transport) {
  std::vector<std::string> log;
  mcp::RecordingTransport rec(transport, log);

  auto raw = [&rec](const std::string& line) {
    rec.send(line);
    rec.receive();
  };
  // Before the handshake.
  raw(R"({"id":1000,"jsonrpc":"2.0","method":"tools/list","params":{}})");
  raw(R"({"id":1001,"jsonrpc":"2.0","method":"initialize","params":{"protocolVersion":"1999-01-01","capabilities":{},"clientInfo":{"name":"x","version":"0"}}})");

  mcp::Client client(rec, "3dify-conformance", "1");
  client.initialize();
  auto call = [&client](std::string_view tool, const json& args) {
    try {
      client.call_tool(tool, args);
    } catch (const mcp::RemoteError&) {
    }
  };
  auto request = [&client](std::string method, const json& params) {
    try {
      client.request(std::move(method), params);
    } catch (const mcp::RemoteError&) {
    }
  };

  client.list_tools();
  client.read_resource("shortcut://keys");
  request("resources/read", {{"uri", "shortcut://nothing"}});
  request("initialize", {{"protocolVersion", "2024-11-05"}, {"capabilities", json::object()},
                         {"clientInfo", {{"name", "again"}, {"version", "1"}}}});
  request("tools/launch", json::object());
  request("tools/call", json::object());
  request("tools/call", {{"name", "run_cmd_on_default_console"}, {"arguments", json::object()}});
  request("tools/call", {{"name", "run_cmd_on_default_console"}, {"arguments", {{"cmd", 42}}}});
  call("delete_everything", json::object());

  raw("{not json");
  raw(R"({"id":1002,"jsonrpc":"1.0","method":"tools/list"})");
  raw(R"([{"id":1003,"jsonrpc":"2.0","method":"tools/list"}])");
  raw(R"({"id":1004,"jsonrpc":"2.0"})");

  for (const char* cmd : kBuild) {
    call("run_cmd_on_default_console", {{"cmd", cmd}});
  }
  call("run_cmd_on_default_console", {{"cmd", "add cube tmp_a width=1\nadd cube tmp_b width=1\nlink tmp_a.width = tmp_b.width\nlink tmp_b.width = tmp_a.width"}});
  call("run_cmd_on_default_console", {{"cmd", "add cube tray width=0.2\nlink tray.loc_z = psu.loc_z * 3"}});
  for (int i = 0; i < 12; ++i) {
    call("run_cmd_on_default_console", {{"cmd", "set gpu.loc_x " + std::to_string(i) + ".5"}});
    call("get_scene_snapshot", json::object());
  }
  for (const auto* name : {"case", "gpu", "psu", "fan_front", "fan_rear", "motherboard", "tray", "glow"}) {
    call("run_cmd_on_default_console", {{"cmd", std::string("query ") + name}});
  }
  call("render_summary", json::object());
  client.read_resource("shortcut://keys");
  call("get_scene_snapshot", json::object());
  client.list_tools();
  return log;
}

std::size_t conformance_request_count(const std::vector<std::string>& transcript) {
  std::size_t n = 0;
  for (const auto& line : transcript) {
    if (line.rfind("> ", 0) != 0) continue;
    try {
      const auto j = json::parse(line.substr(2));
      if (j.is_object() && j.contains("id") && j.contains("method")) ++n;
    } catch (const json::parse_error&) {
      ++n;  // malformed request lines still count
    }
  }
  return n;
}

}  // namespace threedify::dcc
