#include <doctest.h>

#include "threedify/loop/feedback.hpp"

using namespace threedify;
using namespace threedify::loop;

namespace {

agents::ScriptedProvider make_provider() {
  return agents::ScriptedProvider(json::parse(R"({"rules":[
    {"role":"visualizer","reply":{"generate_candidates":{
      "params":{"width":{"min":0.5,"max":4,"step":0.25},"height":{"min":1,"max":5,"step":0.5}},
      "descriptor":"case {width}x{height}"}}},
    {"role":"planner","reply":{"plan_template":{"steps":[
      {"description":"case","console_cmds":["add cube case width={width} height={height}"]},
      {"description":"fan","console_cmds":["add cylinder fan radius=0.1","link fan.loc_z = case.height * 0.8"]}]}}}]})"));
}

// Every ordered partition of {0..n-1} into non-empty blocks; block r holds
// the slots first selected in round r+1.
void ordered_partitions(std::size_t n, std::vector<std::vector<std::size_t>>& blocks,
                        std::vector<bool>& used, std::size_t placed,
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

}  // namespace

TEST_CASE("start_loop preconditions") {
  auto provider = make_provider();
  const auto one = start_loop("pc", 1, provider);
  CHECK(one.current.size() == 1);
  CHECK(one.round == 1);
  CHECK(one.status == LoopStatus::collecting);
  CHECK_THROWS_AS(start_loop("pc", 0, provider), LoopError);
  const auto a = start_loop("pc", 4, provider);
  const auto b = start_loop("pc", 4, provider);
  CHECK(a.to_json() == b.to_json());
}

TEST_CASE("m = n on round 1 finalizes immediately") {
  auto provider = make_provider();
  auto state = start_loop("pc", 3, provider);
  Selection all;
  for (const auto& c : state.current) all.selected_ids.insert(c.id);
  state = submit_selection(state, all, provider);
  CHECK(state.status == LoopStatus::finalizing);
  CHECK(state.history.size() == 1);
  CHECK(state.round == 1);
  CHECK_THROWS_AS(submit_selection(state, all, provider), LoopError);
}

TEST_CASE("m = 0 regenerates every slot") {
  auto provider = make_provider();
  const auto first = start_loop("pc", 4, provider);
  const auto next = submit_selection(first, {}, provider);
  CHECK(next.round == 2);
  REQUIRE(next.current.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(next.current[i].id == "cand-2-" + std::to_string(i + 1));
    CHECK(next.current[i].params != first.current[i].params);
  }
}

TEST_CASE("selection validation") {
  auto provider = make_provider();
  const auto state = start_loop("pc", 2, provider);
  CHECK_THROWS_AS(submit_selection(state, {{"cand-9-9"}, {}, false}, provider), LoopError);
  CHECK_THROWS_AS(submit_selection(state, {{"cand-1-1"}, {{"cand-1-1", "no"}}, false}, provider), LoopError);
  CHECK_THROWS_AS(submit_selection(state, {{}, {{"nope", "no"}}, false}, provider), LoopError);
  CHECK_NOTHROW(submit_selection(state, {{"cand-1-1"}, {{"cand-1-2", "too plain"}}, true}, provider));
}

TEST_CASE("monotone selections terminate within n rounds and preserve selections") {
  auto provider = make_provider();
  for (std::size_t n = 1; n <= 6; ++n) {
    const auto initial = start_loop("pc", n, provider);
    std::size_t sequences = 0;
    std::vector<std::vector<std::size_t>> blocks;
    std::vector<bool> used(n, false);
    ordered_partitions(n, blocks, used, 0, [&](const std::vector<std::vector<std::size_t>>& seq) {
      ++sequences;
      auto state = initial;
      std::map<std::string, agents::Candidate> frozen;
      std::set<std::string> chosen;
      for (std::size_t r = 0; r < seq.size(); ++r) {
        REQUIRE(state.status == LoopStatus::collecting);
        REQUIRE(state.current.size() == n);
        for (const auto& c : state.current) {
          if (frozen.count(c.id)) REQUIRE(frozen.at(c.id) == c);
        }
        for (const auto& [id, c] : frozen) {
          bool present = false;
          for (const auto& cur : state.current) present = present || cur.id == id;
          REQUIRE(present);
        }
        for (auto slot : seq[r]) {
          chosen.insert(state.current[slot].id);
          frozen.emplace(state.current[slot].id, state.current[slot]);
        }
        Selection sel;
        sel.selected_ids = chosen;
        state = submit_selection(state, sel, provider);
      }
      CHECK(state.status == LoopStatus::finalizing);
      CHECK(state.round == static_cast<int>(seq.size()));
      CHECK(state.round <= static_cast<int>(n));
      CHECK(state.history.size() == seq.size());
      for (const auto& c : state.current) CHECK(frozen.at(c.id) == c);
    });
    const std::size_t fubini[] = {1, 1, 3, 13, 75, 541, 4683};
    CHECK(sequences == fubini[n]);
  }
}

TEST_CASE("round cap accepts the selected subset") {
  auto provider = make_provider();
  auto state = start_loop("pc", 3, provider, {2});
  state = submit_selection(state, {{"cand-1-2"}, {}, false}, provider);
  CHECK(state.status == LoopStatus::collecting);
  state = submit_selection(state, {{"cand-1-2", "cand-2-3"}, {}, false}, provider);
  CHECK(state.status == LoopStatus::finalizing);
  CHECK(state.partial);
  CHECK(state.accepted().size() == 2);

  auto empty = start_loop("pc", 2, provider, {1});
  empty = submit_selection(empty, {}, provider);
  CHECK(empty.status == LoopStatus::done);
}

TEST_CASE("finalize builds each accepted candidate in its own scene") {
  auto provider = make_provider();
  auto state = start_loop("pc", 2, provider);
  state = submit_selection(state, {{"cand-1-1", "cand-1-2"}, {}, false}, provider);
  FinalizeServices services;
  services.planner = &provider;
  std::vector<std::string> seen;
  services.on_event = [&](const std::string& id, const agents::StepEvent&) { seen.push_back(id); };
  const auto result = finalize(state, services);
  CHECK(state.status == LoopStatus::done);
  REQUIRE(result.builds.size() == 2);
  CHECK(result.all_completed());
  CHECK(seen == std::vector<std::string>{"cand-1-1", "cand-1-1", "cand-1-2", "cand-1-2"});
  CHECK(result.scopes["numeric_scopes"].contains("width"));

  // Same scene built by hand through the console.
  const auto& c = state.current[0];
  dcc::SceneStore store;
  store.run("add cube case width=" + format_number(std::get<double>(c.params.at("width"))) +
            " height=" + format_number(std::get<double>(c.params.at("height"))));
  store.run("add cylinder fan radius=0.1\nlink fan.loc_z = case.height * 0.8");
  const auto manual = dcc::snapshot(store.scene());
  CHECK(result.builds[0].report->final_snapshot == manual);
  CHECK(result.snapshot_refs()[0] == hex64(fnv1a_64(manual)));
}

TEST_CASE("finalize marks an escalated candidate incomplete") {
  agents::ScriptedProvider provider(json::parse(R"({"rules":[
    {"role":"visualizer","reply":{"candidates":[{"params":{"w":1}},{"params":{"w":-1}}]}},
    {"role":"planner","reply":{"plan_template":{"steps":[
      {"description":"case","console_cmds":["add cube case scale_x={w}"]}]}}}]})"));
  auto state = start_loop("pc", 2, provider);
  state = submit_selection(state, {{"cand-1-1", "cand-1-2"}, {}, false}, provider);
  FinalizeServices services;
  services.planner = &provider;
  const auto result = finalize(state, services);
  REQUIRE(result.builds.size() == 2);
  CHECK(result.builds[0].completed);
  CHECK_FALSE(result.builds[1].completed);
  CHECK(result.builds[1].error.find("step 1") != std::string::npos);
  CHECK_FALSE(result.all_completed());
  CHECK(state.status == LoopStatus::done);
}
