#include "threedify/loop/feedback.hpp"

namespace threedify::loop {

using agents::Candidate;

std::string_view to_string(LoopStatus status) {
  switch (status) {
    case LoopStatus::collecting: return "collecting";
    case LoopStatus::finalizing: return "finalizing";
    case LoopStatus::done: return "done";
  }
  return "unknown";
}

json Selection::to_json() const {
  return {{"selected_ids", selected_ids}, {"rejection_reasons", rejection_reasons}, {"more_diversity", more_diversity}};
}

Selection Selection::from_json(const json& j) {
  if (!j.is_object()) throw LoopError("selection must be an object");
  Selection s;
  try {
    s.selected_ids = j.value("selected_ids", std::set<std::string>{});
    s.rejection_reasons = j.value("rejection_reasons", std::map<std::string, std::string>{});
    s.more_diversity = j.value("more_diversity", false);
  } catch (const json::exception&) {
    throw LoopError("selection needs selected_ids: [string], rejection_reasons: {id: string}, more_diversity: bool");
  }
  return s;
}

std::vector<Candidate> LoopState::accepted() const {
  std::vector<Candidate> out;
  for (const auto& c : current) {
    if (selected_ids.count(c.id)) out.push_back(c);
  }
  return out;
}

json LoopState::to_json() const {
  json cands = json::array();
  for (const auto& c : current) cands.push_back(c.to_json());
  json hist = json::array();
  for (const auto& h : history) {
    auto entry = h.selection.to_json();
    entry["round"] = h.round;
    hist.push_back(std::move(entry));
  }
  json j{{"prompt", prompt},
         {"n", n},
         {"round", round},
         {"current", cands},
         {"selected_ids", selected_ids},
         {"history", hist},
         {"status", to_string(status)},
         {"partial", partial}};
  j["max_rounds"] = options.max_rounds ? json(*options.max_rounds) : json(nullptr);
  return j;
}

LoopState start_loop(const std::string& prompt, std::size_t n, agents::Provider& provider, LoopOptions options) {
  if (n < 1) throw LoopError("candidate count must be at least 1");
  if (options.max_rounds && *options.max_rounds < 1) throw LoopError("max_rounds must be at least 1");
  LoopState state;
  state.prompt = prompt;
  state.n = n;
  state.options = options;
  state.current = agents::visualize_candidates(provider, prompt, n, 1);
  return state;
}

void validate_selection(const LoopState& state, const Selection& sel) {
  if (state.status != LoopStatus::collecting) {
    throw LoopError("loop is " + std::string(to_string(state.status)) + ", not collecting selections");
  }
  std::set<std::string> ids;
  for (const auto& c : state.current) ids.insert(c.id);
  for (const auto& id : sel.selected_ids) {
    if (!ids.count(id)) throw LoopError("selected id '" + id + "' is not in round " + std::to_string(state.round));
  }
  for (const auto& [id, reason] : sel.rejection_reasons) {
    if (!ids.count(id)) throw LoopError("rejected id '" + id + "' is not in round " + std::to_string(state.round));
    if (sel.selected_ids.count(id)) throw LoopError("reason given for selected id '" + id + "'");
  }
}

LoopState submit_selection(const LoopState& state, const Selection& sel, agents::Provider& provider) {
  validate_selection(state, sel);
  LoopState next = state;
  next.history.push_back({state.round, sel});
  next.selected_ids = sel.selected_ids;
  if (sel.selected_ids.size() == state.n) {
    next.status = LoopStatus::finalizing;
    return next;
  }
  if (state.options.max_rounds && state.round >= *state.options.max_rounds) {
    next.partial = true;
    next.status = sel.selected_ids.empty() ? LoopStatus::done : LoopStatus::finalizing;
    return next;
  }
  agents::SelectionFeedback fb{state.current, sel.selected_ids, sel.rejection_reasons, sel.more_diversity};
  next.current = agents::visualize_candidates(provider, state.prompt, state.n, state.round + 1, fb);
  next.round = state.round + 1;
  return next;
}

json CandidateBuild::to_json() const {
  json j{{"candidate_id", candidate_id}, {"completed", completed}, {"spec", spec}};
  j["report"] = report ? report->to_json() : json(nullptr);
  if (!error.empty()) j["error"] = error;
  return j;
}

std::vector<std::string> FinalizationResult::snapshot_refs() const {
  std::vector<std::string> out;
  for (const auto& b : builds) out.push_back(b.report ? b.report->snapshot_ref : "");
  return out;
}

bool FinalizationResult::all_completed() const {
  for (const auto& b : builds) {
    if (!b.completed) return false;
  }
  return true;
}

json FinalizationResult::to_json() const {
  json bs = json::array();
  for (const auto& b : builds) bs.push_back(b.to_json());
  return {{"builds", bs}, {"scopes", scopes}};
}

FinalizationResult finalize(LoopState& state, const FinalizeServices& services) {
  if (state.status != LoopStatus::finalizing) {
    throw LoopError("finalize needs status finalizing, not " + std::string(to_string(state.status)));
  }
  if (!services.planner) throw LoopError("finalize needs a planner provider");
  FinalizationResult result;
  const auto accepted = state.accepted();
  try {
    const auto spec = agents::extract_scopes(accepted).to_json();
    result.scopes = {{"numeric_scopes", spec["numeric_scopes"]}, {"categorical_scopes", spec["categorical_scopes"]}};
  } catch (const agents::PlanError&) {
    result.scopes = nullptr;
  }
  for (const auto& c : accepted) {
    CandidateBuild build;
    build.candidate_id = c.id;
    try {
      const auto spec = agents::plan_from_selection(*services.planner, state.prompt, {c});
      build.spec = spec.to_json();
      agents::DccConnection conn;
      try {
        conn = services.connect();
      } catch (const std::exception& e) {
        throw agents::ExecutionError(std::string("DCC connection failed: ") + e.what());
      }
      agents::ManageOptions opts;
      opts.manager = services.manager;
      if (services.on_event) {
        opts.on_event = [&](const agents::StepEvent& e) { services.on_event(c.id, e); };
      }
      build.report = agents::manage_execute(spec, *conn.client, services.budget, opts);
      build.completed = build.report->completed;
      if (!build.completed) build.error = build.report->escalation_message;
    } catch (const agents::PlanError& e) {
      build.error = std::string("planning failed: ") + e.what();
    } catch (const agents::ProviderError& e) {
      build.error = std::string("provider failed: ") + e.what();
    } catch (const agents::ExecutionError& e) {
      build.error = e.what();
    }
    result.builds.push_back(std::move(build));
  }
  state.status = LoopStatus::done;
  return result;
}

}  // namespace threedify::loop
