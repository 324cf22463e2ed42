#include <doctest.h>

#include <random>
#include <set>

#include "threedify/agents/pipeline.hpp"

using namespace threedify;
using namespace threedify::agents;

namespace {

json visualizer_fixture() {
  return json::parse(R"({"rules":[{"role":"visualizer","reply":{"generate_candidates":{
    "params":{"width":{"min":0.5,"max":3,"step":0.25},"height":{"min":1,"max":4,"step":0.5},
              "style":{"choices":["tower","cube","slim"]}},
    "descriptor":"{style} case {width}x{height}"}}}]})");
}

class Recording : public Provider {
 public:
  explicit Recording(Provider& inner) : inner_(inner) {}
  ProviderReply complete(const std::string& role, const Context& context) override {
    seen.push_back(context);
    return inner_.complete(role, context);
  }
  std::vector<Context> seen;

 private:
  Provider& inner_;
};

ProceduralSpec plan_of(std::vector<std::vector<std::string>> steps) {
  ProceduralSpec spec;
  for (std::size_t i = 0; i < steps.size(); ++i) spec.plan.push_back({"step " + std::to_string(i + 1), steps[i], {}});
  return spec;
}

// Console tool that fails the calls whose 1-based ordinal is in `fail`.
struct FlakyDcc {
  std::shared_ptr<dcc::SceneStore> store = std::make_shared<dcc::SceneStore>();
  std::set<int> fail;
  int calls = 0;
  mcp::Server server{{"flaky", "0"}, registry()};
  mcp::LoopbackTransport transport{server};
  mcp::Client client{transport};

  mcp::ToolRegistry registry() {
    mcp::ToolRegistry r;
    r.add_tool({std::string(kConsoleTool), "Run console commands", {{"cmd", {"string", "Script", true}}}},
               [this](const json& args) {
                 if (fail.count(++calls)) throw std::runtime_error("simulated console failure");
                 return store->run(args.at("cmd").get<std::string>());
               });
    r.add_tool({"get_scene_snapshot", "Snapshot", {}}, [this](const json&) { return dcc::snapshot(store->scene()); });
    return r;
  }
};

}  // namespace

TEST_CASE("visualizer returns n distinct candidates with round ids") {
  ScriptedProvider provider(visualizer_fixture());
  const auto set = visualize_candidates(provider, "gaming pc", 4, 1);
  REQUIRE(set.size() == 4);
  std::set<std::string> distinct;
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(set[i].id == "cand-1-" + std::to_string(i + 1));
    CHECK(set[i].thumbnail.rfind("<svg", 0) == 0);
    distinct.insert(canonical_dump(params_to_json(set[i].params)));
  }
  CHECK(distinct.size() == 4);
  CHECK(Candidate::from_json(set[2].to_json()) == set[2]);
}

TEST_CASE("refinement keeps selected slots and regenerates the rest") {
  ScriptedProvider scripted(visualizer_fixture());
  Recording provider(scripted);
  const auto first = visualize_candidates(provider, "gaming pc", 4, 1);
  SelectionFeedback fb{first, {"cand-1-1", "cand-1-3"}, {{"cand-1-2", "too tall"}}, true};
  const auto second = visualize_candidates(provider, "gaming pc", 4, 2, fb);
  REQUIRE(second.size() == 4);
  CHECK(second[0] == first[0]);
  CHECK(second[2] == first[2]);
  CHECK(second[1].id == "cand-2-2");
  CHECK(second[3].id == "cand-2-4");
  CHECK(second[1].params != first[1].params);
  CHECK(second[3].params != first[3].params);

  const auto& ctx = provider.seen.back();
  CHECK(ctx.meta["count"] == 2);
  CHECK(ctx.meta["slots"] == json::array({2, 4}));
  const auto text = ctx.text();
  CHECK(text.find("too tall") != std::string::npos);
  CHECK(text.find(std::string(kDiversityPrompt)) != std::string::npos);

  fb.more_diversity = false;
  visualize_candidates(provider, "gaming pc", 4, 2, fb);
  CHECK(provider.seen.back().text().find(std::string(kDiversityPrompt)) == std::string::npos);
}

TEST_CASE("visualizer rejects protocol violations") {
  ScriptedProvider wrong_count(json::parse(
      R"({"rules":[{"role":"visualizer","reply":{"candidates":[{"params":{"w":1}}]}}]})"));
  CHECK_THROWS_AS(visualize_candidates(wrong_count, "x", 2, 1), ProviderError);
  ScriptedProvider bad_name(json::parse(
      R"({"rules":[{"role":"visualizer","reply":{"candidates":[{"params":{"9w":1}}]}}]})"));
  CHECK_THROWS_AS(visualize_candidates(bad_name, "x", 1, 1), ProviderError);
  ScriptedProvider text_reply(json::parse(R"({"rules":[{"role":"*","reply":{"text":"hi"}}]})"));
  CHECK_THROWS_AS(visualize_candidates(text_reply, "x", 1, 1), ProviderError);
  UnavailableProvider down;
  CHECK_THROWS_AS(visualize_candidates(down, "x", 1, 1), ProviderError);
  CHECK_THROWS_AS(visualize_candidates(down, "x", 0, 1), std::invalid_argument);
}

TEST_CASE("scopes match an independent min/max over random selections") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> styles{"a", "b", "c", "d"};
  for (int trial = 0; trial < 300; ++trial) {
    const auto m = 1 + rng() % 6;
    std::vector<Candidate> sel;
    std::map<std::string, std::vector<double>> nums;
    std::set<std::string> cats;
    for (std::size_t i = 0; i < m; ++i) {
      Candidate c;
      c.id = "c" + std::to_string(i);
      for (const auto* name : {"w", "h"}) {
        const double v = std::uniform_real_distribution<double>(-50, 50)(rng);
        c.params[name] = v;
        nums[name].push_back(v);
      }
      c.params["style"] = styles[rng() % styles.size()];
      cats.insert(std::get<std::string>(c.params["style"]));
      sel.push_back(c);
    }
    const auto spec = extract_scopes(sel);
    for (const auto& [name, values] : nums) {
      double lo = values[0], hi = values[0];
      for (double v : values) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
      }
      CHECK(spec.numeric_scopes.at(name) == NumericScope{lo, hi});
    }
    CHECK(spec.categorical_scopes.at("style") == cats);
    if (m == 1) CHECK(spec.numeric_scopes.at("w").min == spec.numeric_scopes.at("w").max);
  }
  Candidate a{"a", {{"w", 1.0}}, "", ""};
  Candidate b{"b", {{"h", 1.0}}, "", ""};
  Candidate c{"c", {{"w", std::string("x")}}, "", ""};
  CHECK_THROWS_AS(extract_scopes({a, b}), PlanError);
  CHECK_THROWS_AS(extract_scopes({a, c}), PlanError);
  CHECK_THROWS_AS(extract_scopes({}), PlanError);
}

TEST_CASE("plan parsing names the offending step") {
  const auto steps = parse_plan(
      R"({"steps":[{"description":"case","console_cmds":["add cube case width=2"],
          "expected_check":{"query":"case","contains":"width: 2"}}]})");
  REQUIRE(steps.size() == 1);
  CHECK(steps[0].expected_check->query == "case");
  CHECK_THROWS_WITH_AS(parse_plan(R"({"steps":[{"console_cmds":["add cube a"]},{"console_cmds":["add cube"]}]})"),
                       doctest::Contains("step 2, command 1"), PlanError);
  CHECK_THROWS_AS(parse_plan("not json"), PlanError);
  CHECK_THROWS_AS(parse_plan(R"({"steps":[{"console_cmds":[]}]})"), PlanError);
  CHECK_THROWS_AS(parse_plan(R"({"steps":[{"console_cmds":["add cube a\nadd cube b"]}]})"), PlanError);
}

TEST_CASE("planner fills a plan template from a single candidate") {
  ScriptedProvider planner(json::parse(R"({"rules":[{"role":"planner","reply":{"plan_template":{"steps":[
      {"description":"case","console_cmds":["add cube case width={width} height={height}"]}]}}}]})"));
  Candidate c{"cand-1-1", {{"width", 1.5}, {"height", 2.0}}, "pc", ""};
  const auto spec = plan_from_selection(planner, "pc", {c});
  REQUIRE(spec.plan.size() == 1);
  CHECK(spec.plan[0].console_cmds[0] == "add cube case width=1.5 height=2");
  CHECK(spec.to_json()["numeric_scopes"]["width"] == json::array({1.5, 1.5}));
}

TEST_CASE("retry budget closed form") {
  for (std::uint64_t base = 1; base <= 3; ++base) {
    for (std::uint64_t per = 0; per <= 2; ++per) {
      for (std::uint64_t cap = 1; cap <= 6; ++cap) {
        for (std::uint64_t k = 0; k <= 100; ++k) {
          const auto want = std::min(cap, base + per * k);
          CHECK(compute_retry_budget({base, per, cap}, k) == want);
        }
      }
    }
  }
  const auto big = std::numeric_limits<std::uint64_t>::max();
  CHECK(compute_retry_budget({big, big, big}, big) == big);
  CHECK(compute_retry_budget({1, 1, 4}, big) == 4);
  CHECK_THROWS_AS(compute_retry_budget({0, 1, 4}, 1), std::invalid_argument);
  CHECK_THROWS_AS(compute_retry_budget({1, 1, 0}, 1), std::invalid_argument);
}

TEST_CASE("clean plan takes one attempt per step") {
  auto conn = connect_embedded_dcc();
  std::vector<StepEvent> events;
  ManageOptions opts;
  opts.on_event = [&](const StepEvent& e) { events.push_back(e); };
  const auto report = manage_execute(plan_of({{"add cube case width=2"}, {"add cube fan"}, {"add light glow"}}),
                                     *conn.client, {}, opts);
  CHECK(report.completed);
  CHECK(report.attempts() == std::vector<std::uint64_t>{1, 1, 1});
  CHECK(events.size() == 3);
  CHECK(report.snapshot_ref == hex64(fnv1a_64(report.final_snapshot)));
  CHECK(json::parse(report.final_snapshot)["objects"].size() == 3);
  CHECK_THROWS_AS(manage_execute(ProceduralSpec{}, *conn.client, {}), PlanError);
}

TEST_CASE("flaky console recovers within budget") {
  FlakyDcc dcc;
  dcc.client.initialize();
  dcc.fail = {2, 3};
  const auto report =
      manage_execute(plan_of({{"add cube a"}, {"add cube b", "add cube c"}}), dcc.client, {1, 1, 4});
  CHECK(report.completed);
  CHECK(report.attempts() == std::vector<std::uint64_t>{1, 3});
  CHECK(report.steps[1].errors.size() == 2);
}

TEST_CASE("exhausted budget escalates and halts") {
  FlakyDcc dcc;
  dcc.client.initialize();
  for (int i = 2; i < 100; ++i) dcc.fail.insert(i);
  std::vector<std::string> cmds;
  for (int i = 0; i < 10; ++i) cmds.push_back("add cube p" + std::to_string(i));
  std::vector<StepEvent> events;
  ManageOptions opts;
  opts.on_event = [&](const StepEvent& e) { events.push_back(e); };
  const auto report = manage_execute(plan_of({{"add cube a"}, cmds, {"add cube z"}}), dcc.client, {1, 1, 4}, opts);
  CHECK_FALSE(report.completed);
  CHECK(report.attempts() == std::vector<std::uint64_t>{1, 4});
  REQUIRE(report.escalated_step);
  CHECK(*report.escalated_step == 1);
  CHECK(report.steps[1].escalated);
  CHECK(report.escalation_message.find("step 2") != std::string::npos);
  CHECK(events.back().escalated);
  CHECK(dcc.calls == 5);
  CHECK(json::parse(report.final_snapshot)["objects"].size() == 1);
}

TEST_CASE("manager revises failing commands") {
  auto conn = connect_embedded_dcc();
  ScriptedProvider manager(json::parse(R"({"rules":[{"role":"manager","contains":"add cube case",
      "reply":{"tool_call":{"tool":"run_cmd_on_default_console","args":{"cmd":"add cube case2"}}}}]})"));
  ManageOptions opts;
  opts.manager = &manager;
  const auto report = manage_execute(plan_of({{"add cube case"}, {"add cube case"}}), *conn.client, {1, 1, 4}, opts);
  CHECK(report.completed);
  CHECK(report.attempts() == std::vector<std::uint64_t>{1, 2});
}

TEST_CASE("transport failure is an execution error") {
  auto conn = connect_embedded_dcc();
  conn.transport->close();
  CHECK_THROWS_AS(manage_execute(plan_of({{"add cube a"}}), *conn.client, {}), ExecutionError);
  CHECK_THROWS_AS(connect_external_dcc("udp:1"), std::invalid_argument);
}

TEST_CASE("pipeline is deterministic") {
  auto run = [] {
    ScriptedProvider viz(visualizer_fixture());
    const auto cands = visualize_candidates(viz, "pc", 3, 1);
    ScriptedProvider planner(json::parse(R"({"rules":[{"role":"planner","reply":{"plan_template":{"steps":[
        {"description":"case","console_cmds":["add custom case width={width} height={height} style=\"{style}\""]}]}}}]})"));
    const auto spec = plan_from_selection(planner, "pc", {cands[1]});
    auto conn = connect_embedded_dcc();
    return std::make_pair(canonical_dump(cands[1].to_json()), manage_execute(spec, *conn.client, {}).snapshot_ref);
  };
  CHECK(run() == run());
}

TEST_CASE("computer-use seam escalates after the budget") {
  UnsupportedCua cua;
  const auto out = run_cua_task(cua, "open the render panel", {1, 1, 4}, 2);
  CHECK(out.attempts == 3);
  CHECK(out.escalated);
}
