#include "threedify/service/replay.hpp"

#include <fstream>
#include <sstream>

#include "threedify/service/sessions.hpp"

namespace threedify::service {

namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ScenarioError(path.string() + ": " + e.what());
  }
}

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& rel, const std::string& content) {
    const auto path = dir_ / rel;
    fs::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << content;
    written_.push_back(rel);
  }
  void write_json(const std::string& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  std::vector<std::string> written_;
};

}  // namespace

ReplayResult replay_scenario(const fs::path& scenario_dir, const ReplayOptions& options) {
  const auto spec = read_json(scenario_dir / "scenario.json");
  if (!spec.is_object() || !spec.contains("prompt") || !spec["prompt"].is_string()) {
    throw ScenarioError("scenario.json needs a string 'prompt'");
  }

  ServiceConfig cfg;
  cfg.provider = std::make_shared<agents::ScriptedProvider>(
      read_json(scenario_dir / spec.value("provider", std::string("provider.json"))));
  if (spec.contains("workflow")) {
    try {
      cfg.workflow = chatflow::load_workflow_file(chatflow::resolve_workflow_path(options.root / spec["workflow"].get<std::string>()));
    } catch (const chatflow::WorkflowError& e) {
      throw ScenarioError("workflow: " + e.diagnostics().front());
    }
  }
  if (spec.contains("rag_corpus")) {
    const auto& rag = spec["rag_corpus"];
    rag::ChunkConfig chunks{rag.value("parent", std::size_t{1200}), rag.value("child", std::size_t{200})};
    cfg.index = std::make_shared<rag::IndexHolder>();
    cfg.index->replace(std::make_shared<const rag::Index>(
        rag::ingest_path(scenario_dir / rag.at("path").get<std::string>(), chunks)));
  }
  if (spec.contains("budget")) {
    const auto& b = spec["budget"];
    cfg.budget = {b.value("base", std::uint64_t{1}), b.value("per_step", std::uint64_t{1}), b.value("cap", std::uint64_t{4})};
  }
  cfg.fixed_time = spec.value("clock", std::string("2025-01-01T00:00:00.000Z"));
  SessionService svc(cfg);

  Artifacts out(options.out_dir.empty() ? scenario_dir / "out" : options.out_dir);
  json create{{"prompt", spec["prompt"]}, {"n", spec.value("n", 4)}};
  if (spec.contains("max_rounds")) create["max_rounds"] = spec["max_rounds"];
  auto session = svc.create_session(create);
  const std::string id = session["id"];

  std::string turns;
  for (const auto& step : spec.value("steps", json::array())) {
    if (step.contains("turn")) {
      const auto result = svc.post_turn(id, {{"input", step["turn"]}});
      turns += json{{"input", step["turn"]},
                    {"output", result["output"]},
                    {"stage", result["conversation"]["stage"]},
                    {"trace", result["trace"]}}
                   .dump() +
               "\n";
    } else if (step.contains("select")) {
      auto request = step["select"];
      request["round"] = svc.get_session(id)["loop"]["round"];
      svc.post_selection(id, request);
    } else {
      throw ScenarioError("unknown scenario step " + step.dump());
    }
  }

  session = svc.get_session(id);
  bool finished = false;
  std::string events;
  for (const auto& e : svc.events_after(id, 0, std::chrono::milliseconds(0), finished)) events += e.dump() + "\n";

  json summary{{"prompt", session["prompt"]},
               {"status", session["status"]},
               {"rounds", session["loop"]["round"]},
               {"snapshot_refs", json::object()}};
  for (auto& c : session["loop"]["current"]) {
    const std::string cid = c["id"];
    out.write("thumbnails/" + cid + ".svg", c["thumbnail"].get<std::string>());
    c["thumbnail"] = "thumbnails/" + cid + ".svg";
  }
  if (!session["finalization"].is_null()) {
    for (const auto& b : session["finalization"]["builds"]) {
      const std::string cid = b["candidate_id"];
      summary["snapshot_refs"][cid] = b["report"].is_null() ? json(nullptr) : b["report"]["snapshot_ref"];
      if (!b["report"].is_null()) {
        out.write("scenes/" + cid + ".json", svc.get_scene(id, cid) + "\n");
      }
    }
  }
  out.write_json("session.json", session);
  out.write("events.jsonl", events);
  if (!turns.empty()) out.write("turns.jsonl", turns);
  out.write_json("summary.json", summary);

  ReplayResult result;
  result.artifact_dir = out.dir();
  result.written = out.written();
  const auto expected = scenario_dir / "expected";
  if (options.update_goldens) {
    fs::create_directories(expected);
    for (const auto& rel : out.written()) {
      fs::create_directories((expected / rel).parent_path());
      fs::copy_file(out.dir() / rel, expected / rel, fs::copy_options::overwrite_existing);
    }
  }
  if (!fs::is_directory(expected)) {
    result.mismatches.push_back("expected/ is missing");
    return result;
  }
  std::vector<fs::path> goldens;
  for (const auto& entry : fs::recursive_directory_iterator(expected)) {
    if (entry.is_regular_file()) goldens.push_back(fs::relative(entry.path(), expected));
  }
  std::sort(goldens.begin(), goldens.end());
  for (const auto& rel : goldens) {
    const auto actual = out.dir() / rel;
    if (!fs::exists(actual)) {
      result.mismatches.push_back(rel.string() + ": not produced");
    } else if (read_file(actual) != read_file(expected / rel)) {
      result.mismatches.push_back(rel.string() + ": differs from golden");
    }
  }
  return result;
}

}  // namespace threedify::service
