// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "support/chatflow_reference.hpp"
#include "support/random_workflow.hpp"
#include "support/scene_oracle.hpp"
#include "threedify/chatflow/workflow.hpp"
#include "threedify/dcc/conformance.hpp"
#include "threedify/dcc/dcc_server.hpp"
#include "threedify/loop/feedback.hpp"
#include "threedify/mcp/client.hpp"
#include "threedify/rag/store.hpp"

using namespace threedify;
namespace fs = std::filesystem;

namespace {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

fs::path source(const std::string& rel) { return fs::path(THREEDIFY_SOURCE_DIR) / rel; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// chatflow ------------------------------------------------------------------

chatflow::TurnServices echo_services() {
  chatflow::TurnServices s;
  s.retrieve = [](const std::string& q, int k) { return "R" + std::to_string(k) + "[" + q + "]"; };
  s.agent = [](const std::string& role, const std::string& prompt) {
    if (prompt.find("x{y}") != std::string::npos && role == "inspector") throw std::runtime_error("agent down");
    return role + ">" + prompt.substr(0, 40);
  };
  s.call_tool = [](const std::string& tool, const json& args) { return tool + canonical_dump(args).substr(0, 40); };
  return s;
}

std::string chatflow_semantics() {
  const auto started = std::chrono::steady_clock::now();
  const auto services = echo_services();
  oracle::RefServices ref_services{services.retrieve, services.agent, services.call_tool};
  constexpr std::size_t kBudget = 60;
  int turns = 0;
  int failing = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto tag = "seed " + std::to_string(seed) + ": ";
    testgen::WorkflowGen gen(seed);
    const auto doc = gen.document();
    expect(chatflow::validate_workflow(doc).empty(), tag + "generated workflow does not validate");
    const auto wf = chatflow::load_workflow(doc);
    oracle::ChatflowReference reference(doc, ref_services, kBudget);
    auto state = wf.initial_state;
    json ref_state = doc["conversation_variables"];
    for (int turn = 0; turn < 3; ++turn) {
      const auto input = gen.input();
      const auto want = reference.run(ref_state, input);
      std::optional<chatflow::TurnResult> got;
      std::string error_node;
      try {
        got = chatflow::run_turn(wf, state, input, services, chatflow::TurnOptions{kBudget});
      } catch (const chatflow::TurnError& e) {
        error_node = e.node();
      }
      expect(got.has_value() == want.ok, tag + "engine and reference disagree on success");
      if (!want.ok) {
        expect(error_node == want.error_node, tag + "error node differs");
        ++failing;
        break;
      }
      ++turns;
      expect(got->output_text == want.output, tag + "output text differs");
      expect(canonical_dump(got->new_state.to_json()) == canonical_dump(want.state), tag + "final state differs");

      std::set<std::string> written;
      for (const auto& id : got->trace) {
        for (const auto& a : wf.nodes.at(id).assignments) written.insert(a.variable);
      }
      for (const auto& name : state.variable_names()) {
        if (*state.get(name) != *got->new_state.get(name)) {
          expect(written.count(name) > 0, tag + "variable " + name + " changed without an assigner");
        }
      }
      state = got->new_state;
      ref_state = want.state;
    }
  }
  const double elapsed = seconds_since(started);
  expect(elapsed < 10.0, "took " + std::to_string(elapsed) + " s");
  std::ostringstream out;
  out << "200 workflows, " << turns << " turns agree, " << failing << " agreeing failures, " << elapsed << " s";
  return out.str();
}

std::string stage_machine() {
  const std::vector<std::string> stages{"Scene Analyzer", "RAG", "Conceptualization", "Builder", "Inspector"};
  int cells = 0;
  for (std::size_t pos = 0; pos < stages.size(); ++pos) {
    for (int dirty = 0; dirty <= 1; ++dirty) {
      for (int enable = 0; enable <= 1; ++enable) {
        const auto tag = "pos " + std::to_string(pos) + " dirty " + std::to_string(dirty) + " enable " +
                         std::to_string(enable) + ": ";
        chatflow::ConversationState in;
        in.stages = stages;
        in.stage_num = pos;
        in.stage = stages[pos];
        in.dirty_bit = dirty;
        in.enable_increment = enable;
        const bool advance = dirty == 0 && enable == 1;
        ++cells;
        if (advance && pos + 1 == stages.size()) {
          bool threw = false;
          try {
            chatflow::to_next_stage(in);
          } catch (const chatflow::TerminalStageError&) {
            threw = true;
          }
          expect(threw, tag + "advancing past the last stage must fail");
          continue;
        }
        const auto out = chatflow::to_next_stage(in);
        const std::size_t want = advance ? pos + 1 : pos;
        expect(out.stage_num == want && out.stage == stages[want], tag + "wrong stage");
        expect(out.dirty_bit == 0, tag + "dirty_bit not cleared");
        expect(out.enable_increment == enable, tag + "enable_increment changed");
      }
    }
  }
  // dirty_bit is cleared for every reachable input, not just the table.
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    testgen::WorkflowGen gen(rng());
    auto state = chatflow::ConversationState::from_json(gen.state());
    try {
      expect(chatflow::to_next_stage(state).dirty_bit == 0, "random state: dirty_bit not cleared");
    } catch (const chatflow::TerminalStageError&) {
    }
  }
  return std::to_string(cells) + " table cells, 2000 random states";
}

std::string loop_budget() {
  const auto wf = chatflow::load_workflow_file(source("templates/3dify-main"));
  auto drive = [&](std::int64_t max, bool passes) {
    auto state = wf.initial_state;
    state.max_inspection_count = max;
    state.remaining_inspection_count = max;
    int builder_calls = 0;
    chatflow::TurnServices services;
    services.retrieve = [](const std::string&, int) { return "reference chunk"; };
    services.agent = [&](const std::string& role, const std::string&) -> std::string {
      if (role == "builder") return "add cube part" + std::to_string(builder_calls);
      if (role == "inspector") return passes ? "PASS" : "FAIL: parts protrude";
      return role + " ok";
    };
    services.call_tool = [&](const std::string&, const json& args) {
      ++builder_calls;
      return "ran " + args["cmd"].get<std::string>();
    };
    for (int turn = 0; turn < 100; ++turn) {
      state = chatflow::run_turn(wf, state, "Create a desktop gaming PC", services).new_state;
      const auto status = std::get<std::string>(*state.get("status"));
      if (!status.empty()) return std::make_pair(builder_calls, status);
    }
    return std::make_pair(builder_calls, std::string("no exit"));
  };
  for (std::int64_t max = 0; max <= 10; ++max) {
    const auto [calls, status] = drive(max, false);
    expect(calls == max && status == "escalated", "max " + std::to_string(max) + ": " + std::to_string(calls) +
                                                      " builder attempts, status " + status);
  }
  const auto [calls, status] = drive(5, true);
  expect(calls == 1 && status == "done", "passing inspector did not finish after one build");
  return "failing inspector: max attempts then escalation for max 0..10";
}

// mcp -----------------------------------------------------------------------

std::string transcript_text(mcp::Transport& transport) {
  std::string text;
  for (const auto& line : dcc::run_conformance_session(transport)) text += line + "\n";
  return text;
}

std::string mcp_conformance() {
  const auto golden = read_file(source("tests/golden/mcp-transcript.txt"));
  expect(!golden.empty(), "golden transcript missing");
  std::vector<std::string> lines;
  std::istringstream in(golden);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  const auto requests = dcc::conformance_request_count(lines);
  expect(requests >= 100, "golden has only " + std::to_string(requests) + " requests");
  for (const char* needle : {"\"initialize\"", "\"tools/list\"", "\"tools/call\"", "\"resources/read\"",
                             "shortcut://keys", "\"error\""}) {
    expect(golden.find(needle) != std::string::npos, std::string("golden lacks ") + needle);
  }
  for (int run = 0; run < 2; ++run) {
    auto server = dcc::make_dcc_server(std::make_shared<dcc::SceneStore>());
    mcp::LoopbackTransport transport(server);
    expect(transcript_text(transport) == golden, "in-process transcript differs from golden");
  }
  {
    mcp::ChildProcessTransport child({THREEDIFY_CLI, "dcc-sim"});
    expect(transcript_text(child) == golden, "transcript over stdio to the dcc-sim process differs from golden");
    child.close();
  }

  std::mt19937_64 rng(99);
  auto server = dcc::make_dcc_server(std::make_shared<dcc::SceneStore>());
  auto conn = server.connect();
  static const std::vector<std::string> fragments{
      "{", "}", "[", "]", "\"jsonrpc\"", ":", "\"2.0\"", ",", "\"id\"", "1", "null", "\"method\"",
      "\"tools/call\"", "\"params\"", "\"result\"", "\"error\"", "-1e999", "\\u0000", "\"", "true"};
  for (int i = 0; i < 100000; ++i) {
    std::string line;
    const int len = static_cast<int>(rng() % 48);
    for (int j = 0; j < len; ++j) {
      if (rng() % 2) {
        line += fragments[rng() % fragments.size()];
      } else {
        line.push_back(static_cast<char>(rng() % 256));
      }
    }
    try {
      mcp::decode_message(line);
    } catch (const mcp::ProtocolError&) {
    }
    if (i % 10 == 0) {
      if (auto reply = conn.handle_line(line)) mcp::decode_message(*reply);
    }
  }
  return std::to_string(requests) + " requests, byte-identical in process and over stdio; 100000 fuzz lines";
}

// scene graph ---------------------------------------------------------------

std::string scene_graph() {
  using namespace threedify::dcc;
  auto run = [](const Scene& s, std::string_view script) { return run_script(s, script).scene; };
  auto num = [](const Scene& s, const std::string& dotted) {
    auto v = s.get_param(*ParamRef::split(dotted));
    expect(v.has_value(), "missing " + dotted);
    return std::get<double>(*v);
  };

  std::mt19937_64 rng(4242);
  int cycles = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto tag = "trial " + std::to_string(trial) + ": ";
    auto g = oracle::random_acyclic_graph(rng);
    Scene s;
    for (const auto& obj : g.objects) {
      s = run(s, "add custom " + obj + " a=" + format_number(g.initial.at(obj + ".a")) +
                     " b=" + format_number(g.initial.at(obj + ".b")) + " c=" + format_number(g.initial.at(obj + ".c")));
    }
    auto order = g.bindings;
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto& [target, expr] : order) s = apply_command(s, LinkCommand{*ParamRef::split(target), expr}).scene;
    for (const auto& [key, value] : oracle::fixed_point(g.initial, g.bindings)) {
      expect(num(s, key) == value, tag + key + " differs from the fixed point");
    }
    // Binding any parameter a target reads back to that target closes a cycle.
    const auto before = snapshot(s);
    for (const auto& [target, expr] : g.bindings) {
      for (const auto& ref : expr.references()) {
        bool rejected = false;
        try {
          apply_command(s, LinkCommand{ref, Expression::reference(*ParamRef::split(target))});
        } catch (const SceneError&) {
          rejected = true;
        }
        expect(rejected, tag + "cycle link " + ref.str() + " = " + target + " accepted");
        expect(snapshot(s) == before, tag + "rejected link changed the scene");
        ++cycles;
      }
      bool rejected = false;
      try {
        apply_command(s, LinkCommand{*ParamRef::split(target), Expression::reference(*ParamRef::split(target))});
      } catch (const SceneError&) {
        rejected = true;
      }
      expect(rejected && snapshot(s) == before, tag + "self link on " + target + " accepted");
      ++cycles;
    }
  }

  auto roof = run({}, "add cube wall height=2.5\nadd cube roof\nlink roof.base_z = wall.height\nset wall.height 3");
  expect(num(roof, "roof.base_z") == 3.0, "roof.base_z does not follow wall.height");
  return "100 random graphs match the oracle, " + std::to_string(cycles) + " cycle links rejected, roof/wall ok";
}

// feedback loop -------------------------------------------------------------

agents::ScriptedProvider loop_provider() {
  return agents::ScriptedProvider(json::parse(R"({"rules":[
    {"role":"visualizer","reply":{"generate_candidates":{
      "params":{"width":{"min":0.5,"max":4,"step":0.25},"height":{"min":1,"max":5,"step":0.5}},
      "descriptor":"case {width}x{height}"}}}]})"));
}

void ordered_partitions(std::size_t n, std::vector<std::vector<std::size_t>>& blocks, std::vector<bool>& used,
                        std::size_t placed,
                        const std::function<void(const std::vector<std::vector<std::size_t>>&)>& visit) {
  if (placed == n) {
    visit(blocks);
    return;
  }
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < n; ++i) {
    if (!used[i]) free.push_back(i);
  }
  for (std::uint32_t mask = 1; mask < (1u << free.size()); ++mask) {
    std::vector<std::size_t> block;
    for (std::size_t b = 0; b < free.size(); ++b) {
      if (mask & (1u << b)) block.push_back(free[b]);
    }
    for (auto s : block) used[s] = true;
    blocks.push_back(block);
    ordered_partitions(n, blocks, used, placed + block.size(), visit);
    blocks.pop_back();
    for (auto s : block) used[s] = false;
  }
}

std::string feedback_loop() {
  auto provider = loop_provider();
  std::size_t total = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto initial = loop::start_loop("Create a desktop gaming PC", n, provider);
    std::vector<std::vector<std::size_t>> blocks;
    std::vector<bool> used(n, false);
    ordered_partitions(n, blocks, used, 0, [&](const std::vector<std::vector<std::size_t>>& seq) {
      ++total;
      const auto tag = "n " + std::to_string(n) + ": ";
      auto state = initial;
      std::map<std::string, std::string> frozen;  // id -> serialized candidate
      std::set<std::string> chosen;
      for (const auto& block : seq) {
        expect(state.status == loop::LoopStatus::collecting, tag + "loop closed early");
        expect(state.current.size() == n, tag + "wrong candidate count");
        for (const auto& c : state.current) {
          auto it = frozen.find(c.id);
          if (it != frozen.end()) expect(it->second == canonical_dump(c.to_json()), tag + "selected candidate changed");
        }
        for (auto slot : block) {
          chosen.insert(state.current[slot].id);
          frozen.emplace(state.current[slot].id, canonical_dump(state.current[slot].to_json()));
        }
        loop::Selection sel;
        sel.selected_ids = chosen;
        state = loop::submit_selection(state, sel, provider);
      }
      expect(state.status == loop::LoopStatus::finalizing, tag + "did not finalize");
      expect(state.round == static_cast<int>(seq.size()) && state.round <= static_cast<int>(n),
             tag + "wrong round count");
      for (const auto& c : state.current) {
        expect(frozen.at(c.id) == canonical_dump(c.to_json()), tag + "accepted candidate changed");
      }
      if (seq.size() == 1) expect(state.round == 1, tag + "m = n did not finalize on round 1");
    });
  }
  return std::to_string(total) + " monotone sequences over n 1..6";
}

// planner -------------------------------------------------------------------

std::string planner_scopes() {
  std::mt19937_64 rng(17);
  const std::vector<std::string> styles{"tower", "cube", "slim", "open"};
  for (int trial = 0; trial < 500; ++trial) {
    const auto m = 1 + rng() % 8;
    std::vector<agents::Candidate> sel;
    for (std::size_t i = 0; i < m; ++i) {
      agents::Candidate c;
      c.id = "c" + std::to_string(i);
      for (const char* name : {"width", "height", "gpu_length"}) {
        c.params[name] = std::uniform_real_distribution<double>(-100, 100)(rng);
      }
      c.params["style"] = styles[rng() % styles.size()];
      sel.push_back(c);
    }
    const auto spec = agents::extract_scopes(sel);
    for (const char* name : {"width", "height", "gpu_length"}) {
      double lo = std::get<double>(sel[0].params.at(name));
      double hi = lo;
      for (const auto& c : sel) {
        const double v = std::get<double>(c.params.at(name));
        lo = v < lo ? v : lo;
        hi = v > hi ? v : hi;
      }
      const auto& scope = spec.numeric_scopes.at(name);
      expect(scope.min == lo && scope.max == hi, std::string("scope of ") + name + " is not the min/max");
      for (const auto& c : sel) {
        const double v = std::get<double>(c.params.at(name));
        expect(scope.min <= v && v <= scope.max, "scope does not contain a selected candidate");
      }
    }
    std::set<std::string> cats;
    for (const auto& c : sel) cats.insert(std::get<std::string>(c.params.at("style")));
    expect(spec.categorical_scopes.at("style") == cats, "categorical scope differs");
  }
  int budgets = 0;
  for (std::uint64_t base = 1; base <= 4; ++base) {
    for (std::uint64_t per = 0; per <= 3; ++per) {
      for (std::uint64_t cap = 1; cap <= 8; ++cap) {
        for (std::uint64_t k = 0; k <= 100; ++k) {
          expect(agents::compute_retry_budget({base, per, cap}, k) == std::min(cap, base + per * k),
                 "retry budget differs from min(cap, base + per_step * complexity)");
          ++budgets;
        }
      }
    }
  }
  return "500 random selections, " + std::to_string(budgets) + " budget cases";
}

// rag -----------------------------------------------------------------------

std::vector<double> brute_embed(const std::string& text) {
  std::vector<double> v(64, 0.0);
  std::string token;
  auto flush = [&] {
    if (!token.empty()) v[fnv1a_64(token) % 64] += 1.0;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) && c < 128) {
      token += static_cast<char>(std::tolower(c));
    } else {
      flush();
    }
  }
  flush();
  double n = 0;
  for (double x : v) n += x * x;
  if (n > 0) {
    n = std::sqrt(n);
    for (double& x : v) x /= n;
  }
  return v;
}

double brute_cos(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0;
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

struct BruteHit {
  std::string parent_id;
  double score;
  std::string child_id;
};

std::vector<BruteHit> brute_query(const rag::Index& index, const std::string& q, std::size_t k) {
  const auto qe = brute_embed(q);
  std::map<std::string, BruteHit> best;
  for (const auto& c : index.children()) {
    const double s = brute_cos(qe, brute_embed(c.text));
    auto it = best.find(c.parent_id);
    if (it == best.end()) {
      best.emplace(c.parent_id, BruteHit{c.parent_id, s, c.id});
    } else if (s > it->second.score || (s == it->second.score && c.id < it->second.child_id)) {
      it->second = {c.parent_id, s, c.id};
    }
  }
  std::vector<BruteHit> all;
  for (const auto& [id, h] : best) all.push_back(h);
  std::stable_sort(all.begin(), all.end(), [](const BruteHit& a, const BruteHit& b) { return a.score > b.score; });
  if (all.size() > k) all.resize(k);
  return all;
}

std::string sentence(std::mt19937_64& rng, int words) {
  static const std::vector<std::string> vocab{"fan",  "case",  "glow",   "GPU",  "cpu",    "board", "panel",
                                              "side", "cable", "cool",   "tower", "light", "RGB",   "roof",
                                              "wall", "mesh",  "socket", "ram",  "drive",  "model", "scene"};
  std::string s;
  for (int i = 0; i < words; ++i) s += (i ? " " : "") + vocab[rng() % vocab.size()];
  return s + ".";
}

std::string rag_store() {
  std::mt19937_64 rng(31337);
  rag::Index index({160, 60});
  for (std::size_t doc = 0; index.children().size() < 1000; ++doc) {
    std::string text;
    for (int p = 0; p < 6; ++p) {
      for (int s = 1 + static_cast<int>(rng() % 3); s > 0; --s) text += sentence(rng, 2 + static_cast<int>(rng() % 9)) + " ";
      text += "\n\n";
    }
    index.ingest("doc" + std::to_string(doc), text);
  }
  for (int q = 0; q < 50; ++q) {
    const auto query = sentence(rng, 1 + static_cast<int>(rng() % 6));
    const std::size_t k = 1 + rng() % 25;
    const auto got = index.query(query, k);
    const auto want = brute_query(index, query, k);
    expect(got.size() == want.size(), "query " + std::to_string(q) + ": hit count differs");
    for (std::size_t i = 0; i < got.size(); ++i) {
      expect(got[i].parent.id == want[i].parent_id && got[i].score == want[i].score &&
                 got[i].best_child_id == want[i].child_id,
             "query " + std::to_string(q) + ": rank " + std::to_string(i + 1) + " differs");
    }
  }
  int exact = 0;
  for (std::size_t c = 0; c < index.children().size(); c += 20) {
    const auto& child = index.children()[c];
    const auto hits = index.query(child.text, 1);
    expect(!hits.empty() && hits[0].score == 1.0, "exact child text did not score 1.0 at rank 1");
    ++exact;
  }
  return std::to_string(index.children().size()) + " chunks, 50 queries, " + std::to_string(exact) +
         " exact-text queries";
}

// end to end ----------------------------------------------------------------

std::string end_to_end() {
  const auto out = fs::temp_directory_path() / ("threedify-acceptance-" + std::to_string(::getpid()));
  const std::string cmd = std::string("\"") + THREEDIFY_CLI + "\" --root \"" + THREEDIFY_SOURCE_DIR +
                          "\" replay scenarios/pc-demo --out \"" + out.string() + "\" > /dev/null";
  const auto started = std::chrono::steady_clock::now();
  const int status = std::system(cmd.c_str());
  const double elapsed = seconds_since(started);
  const auto scene = read_file(out / "scenes/cand-1-2.json");
  fs::remove_all(out);
  expect(WIFEXITED(status) && WEXITSTATUS(status) == 0, "replay exited with status " + std::to_string(status));
  expect(scene.find("\"schema\":\"scene/1\"") != std::string::npos, "no final snapshot written");
  expect(elapsed < 30.0, "took " + std::to_string(elapsed) + " s");
  std::ostringstream msg;
  msg << "replay scenarios/pc-demo exit 0, goldens match, " << elapsed << " s";
  return msg.str();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<std::string()>>> criteria{
      {"chatflow-semantics", chatflow_semantics}, {"stage-machine", stage_machine},
      {"loop-budget", loop_budget},               {"mcp-conformance", mcp_conformance},
      {"scene-graph", scene_graph},               {"feedback-loop", feedback_loop},
      {"planner-scopes", planner_scopes},         {"rag", rag_store},
      {"end-to-end", end_to_end},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    try {
      std::cout << "PASS " << name << ": " << check() << std::endl;
    } catch (const std::exception& e) {
      ++failed;
      std::cout << "FAIL " << name << ": " << e.what() << std::endl;
    }
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria pass" << std::endl;
  return failed == 0 ? 0 : 1;
}
