#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "threedify/dcc/dcc_server.hpp"
#include "threedify/service/http.hpp"
#include "threedify/service/replay.hpp"

namespace fs = std::filesystem;
using namespace threedify;

namespace {

enum Exit { kOk = 0, kUsage = 2, kValidation = 3, kGolden = 4, kRuntime = 5 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::pair<std::string, int> split_host_port(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw UsageError("expected host:port, got '" + text + "'");
  try {
    const int port = std::stoi(text.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return {text.substr(0, colon), port};
  } catch (const std::logic_error&) {
    throw UsageError("bad port in '" + text + "'");
  }
}

// SIGINT/SIGTERM are blocked in every thread; this one waits for them.
void on_termination(std::function<void()> stop) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread([set, stop = std::move(stop)] {
    int sig = 0;
    sigwait(&set, &sig);
    stop();
  }).detach();
}

struct ServeFlags {
  std::string listen = "127.0.0.1:8080";
  std::string fixture;
  std::string workflow = "templates/3dify-main";
  std::string journal;
  std::string mcp;
  std::string index;
  std::string static_dir = "app";
  std::string schema = "docs/api.json";
  int max_rounds = 0;
  std::uint64_t budget_cap = 4;
};

int cmd_serve(const fs::path& root, const ServeFlags& f) {
  service::ServiceConfig cfg;
  if (!f.fixture.empty()) cfg.provider = agents::ScriptedProvider::from_file(root / f.fixture);
  if (!f.workflow.empty()) {
    cfg.workflow = chatflow::load_workflow_file(chatflow::resolve_workflow_path(root / f.workflow));
  }
  if (!f.journal.empty()) cfg.journal_dir = root / f.journal;
  cfg.mcp_endpoint = f.mcp;
  if (!f.index.empty()) {
    cfg.index = std::make_shared<rag::IndexHolder>();
    cfg.index->replace(std::make_shared<const rag::Index>(rag::Index::load(root / f.index)));
  }
  if (f.max_rounds > 0) cfg.max_rounds = f.max_rounds;
  cfg.budget.cap = f.budget_cap;
  if (cfg.budget.cap < 1) throw UsageError("--budget-cap must be at least 1");

  service::SessionService sessions(cfg);
  const auto restored = sessions.restore();
  service::HttpServer http(sessions, {root / f.static_dir, root / f.schema});
  const auto [host, port] = split_host_port(f.listen);
  const int bound = http.bind(host, port);
  if (bound < 0) throw std::runtime_error("cannot listen on " + f.listen);
  on_termination([&http] { http.stop(); });
  std::cerr << "threedify: serving on http://" << host << ":" << bound << " (" << restored << " sessions restored"
            << (cfg.provider ? "" : ", no provider fixture: session creation answers 503") << ")" << std::endl;
  http.serve();
  return kOk;
}

int cmd_dcc_sim(const std::string& tcp) {
  if (tcp.empty()) {
    auto transport = mcp::stdio_transport();
    dcc::serve_dcc_mcp(std::make_shared<dcc::SceneStore>(), *transport);
    return kOk;
  }
  const auto [host, port] = split_host_port(tcp);
  mcp::TcpListener listener(host, static_cast<std::uint16_t>(port));
  on_termination([&listener] { listener.close(); });
  std::cerr << "threedify: dcc-sim MCP server on tcp:" << host << ":" << listener.port() << std::endl;
  // Each connection gets its own scene.
  while (auto conn = listener.accept()) {
    std::thread([t = std::shared_ptr<mcp::FdTransport>(std::move(conn))] {
      dcc::serve_dcc_mcp(std::make_shared<dcc::SceneStore>(), *t);
    }).detach();
  }
  return kOk;
}

int cmd_ingest(const fs::path& root, const std::string& path, std::size_t parent, std::size_t child,
               const std::string& out) {
  if (!(parent > child && child > 0)) throw UsageError("need --parent > --child > 0");
  if (!fs::exists(root / path)) throw UsageError("no such path: " + (root / path).string());
  const auto index = rag::ingest_path(root / path, {parent, child});
  index.save(root / out);
  std::cout << index.stats().str() << std::endl;
  return kOk;
}

int cmd_validate(const fs::path& root, const std::string& path) {
  const auto resolved = chatflow::resolve_workflow_path(root / path);
  std::ifstream in(resolved);
  if (!in) throw UsageError("cannot read workflow " + resolved.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    std::cout << resolved.string() << ": " << e.what() << std::endl;
    return kValidation;
  }
  const auto diagnostics = chatflow::validate_workflow(doc);
  for (const auto& d : diagnostics) std::cout << resolved.string() << ": " << d << std::endl;
  if (!diagnostics.empty()) return kValidation;
  std::cout << resolved.string() << ": ok (" << doc["nodes"].size() << " nodes)" << std::endl;
  return kOk;
}

int cmd_replay(const fs::path& root, const std::string& scenario, const std::string& out, bool update) {
  service::ReplayOptions opts;
  opts.root = root;
  if (!out.empty()) opts.out_dir = root / out;
  opts.update_goldens = update;
  if (!fs::is_directory(root / scenario)) throw UsageError("no scenario directory " + (root / scenario).string());
  const auto result = service::replay_scenario(root / scenario, opts);
  std::cout << "artifacts: " << result.artifact_dir.string() << " (" << result.written.size() << " files)" << std::endl;
  for (const auto& m : result.mismatches) std::cout << "golden mismatch: " << m << std::endl;
  if (!result.ok()) return kGolden;
  std::cout << "replay ok" << std::endl;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3Dify: agent-driven procedural 3D scene generation against a simulated DCC tool"};
  app.require_subcommand(1);
  std::string root = ".";
  app.add_option("--root", root, "Directory that every relative path is resolved against")
      ->envname("THREEDIFY_ROOT");

  ServeFlags serve;
  auto* s = app.add_subcommand("serve", "Run the session HTTP service");
  s->add_option("--listen", serve.listen, "host:port")->envname("THREEDIFY_LISTEN")->capture_default_str();
  s->add_option("--fixture", serve.fixture, "Scripted provider fixture (JSON)")->envname("THREEDIFY_FIXTURE");
  s->add_option("--workflow", serve.workflow, "Chatflow workflow; empty disables turns")->capture_default_str();
  s->add_option("--journal", serve.journal, "Session journal directory")->envname("THREEDIFY_JOURNAL");
  s->add_option("--mcp", serve.mcp, "External DCC MCP endpoint: tcp:host:port or stdio:<program> [args]")
      ->envname("THREEDIFY_MCP");
  s->add_option("--index", serve.index, "RAG index file written by ingest")->envname("THREEDIFY_INDEX");
  s->add_option("--static", serve.static_dir, "Built UI served under /app")->capture_default_str();
  s->add_option("--schema", serve.schema, "API schema served at /v1/schema")->capture_default_str();
  s->add_option("--max-rounds", serve.max_rounds, "Round cap per session; 0 means none")->capture_default_str();
  s->add_option("--budget-cap", serve.budget_cap, "Retry cap per plan step")->capture_default_str();

  std::string tcp;
  auto* d = app.add_subcommand("dcc-sim", "Run the DCC simulator as an MCP server (stdio unless --tcp)");
  d->add_option("--tcp", tcp, "Listen on host:port instead of stdio");

  std::string ingest_path;
  std::string ingest_out = "index.json";
  std::size_t parent = 1200;
  std::size_t child = 200;
  auto* i = app.add_subcommand("ingest", "Build a parent-child RAG index from .md/.txt files");
  i->add_option("path", ingest_path, "File or directory")->required();
  i->add_option("--parent", parent, "Parent chunk size in bytes")->capture_default_str();
  i->add_option("--child", child, "Child chunk size in bytes")->capture_default_str();
  i->add_option("--out", ingest_out, "Index file")->capture_default_str();

  std::string workflow_path;
  auto* w = app.add_subcommand("workflow", "Workflow tools");
  w->require_subcommand(1);
  auto* v = w->add_subcommand("validate", "Print workflow diagnostics");
  v->add_option("path", workflow_path, "Workflow file, name without .json, or directory")->required();

  std::string scenario;
  std::string replay_out;
  bool update = false;
  auto* r = app.add_subcommand("replay", "Replay a scripted scenario and compare with its goldens");
  r->add_option("scenario", scenario, "Scenario directory")->required();
  r->add_option("--out", replay_out, "Artifact directory (default <scenario>/out)");
  r->add_flag("--update-goldens", update, "Overwrite <scenario>/expected with this run's artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return cmd_serve(root, serve);
    if (*d) return cmd_dcc_sim(tcp);
    if (*i) return cmd_ingest(root, ingest_path, parent, child, ingest_out);
    if (*v) return cmd_validate(root, workflow_path);
    if (*r) return cmd_replay(root, scenario, replay_out, update);
  } catch (const UsageError& e) {
    std::cerr << "threedify: " << e.what() << std::endl;
    return kUsage;
  } catch (const service::ScenarioError& e) {
    std::cerr << "threedify: scenario: " << e.what() << std::endl;
    return kValidation;
  } catch (const chatflow::WorkflowError& e) {
    for (const auto& diag : e.diagnostics()) std::cerr << "threedify: " << diag << std::endl;
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "threedify: " << e.what() << std::endl;
    return kRuntime;
  }
  return kUsage;
}
