#include "threedify/agents/pipeline.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace threedify::agents {

namespace {

json param_value_json(const dcc::ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  return std::get<std::string>(v);
}

std::map<std::string, dcc::ParamValue> params_from_json(const json& j, const std::string& who) {
  if (!j.is_object() || j.empty()) throw ProviderError(who + ": params must be a non-empty object");
  std::map<std::string, dcc::ParamValue> out;
  for (const auto& [name, v] : j.items()) {
    if (!dcc::is_valid_param_name(name)) throw ProviderError(who + ": invalid param name '" + name + "'");
    if (v.is_number()) {
      out.emplace(name, v.get<double>());
    } else if (v.is_string()) {
      out.emplace(name, v.get<std::string>());
    } else {
      throw ProviderError(who + ": param '" + name + "' must be a number or a string");
    }
  }
  return out;
}

std::string candidate_line(const Candidate& c) {
  return c.id + " \"" + c.descriptor + "\" " + canonical_dump(params_to_json(c.params));
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Visualizer

json params_to_json(const std::map<std::string, dcc::ParamValue>& params) {
  json out = json::object();
  for (const auto& [k, v] : params) out[k] = param_value_json(v);
  return out;
}

json Candidate::to_json() const {
  return {{"id", id}, {"params", params_to_json(params)}, {"descriptor", descriptor}, {"thumbnail", thumbnail}};
}

Candidate Candidate::from_json(const json& j) {
  return {j.at("id").get<std::string>(), params_from_json(j.at("params"), "candidate"),
          j.value("descriptor", std::string()), j.value("thumbnail", std::string())};
}

std::string preview_thumbnail(const std::map<std::string, dcc::ParamValue>& params) {
  try {
    auto outcome = dcc::apply_command(dcc::Scene{}, dcc::AddCommand{dcc::ObjectKind::custom, "preview", params});
    return dcc::render_thumbnail(outcome.scene);
  } catch (const dcc::SceneError& e) {
    throw ProviderError(std::string("candidate params rejected by the preview scene: ") + e.what());
  }
}

CandidateSet visualize_candidates(Provider& provider, const std::string& prompt, std::size_t n, int round,
                                  const std::optional<SelectionFeedback>& prior) {
  if (n == 0) throw std::invalid_argument("candidate count must be at least 1");
  std::vector<std::size_t> slots;  // 0-based slots to (re)generate
  CandidateSet out(n);
  Context ctx;
  ctx.messages.push_back({"system",
                          "You are the Visualizer. Propose pre-visualization candidates for the user's request, each "
                          "as a parameter set with a short descriptor."});
  ctx.messages.push_back({"user", prompt});
  json avoid = json::array();
  if (prior) {
    if (prior->previous.size() != n) throw std::invalid_argument("previous round has a different candidate count");
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = prior->previous[i];
      if (prior->selected.count(c.id)) {
        out[i] = c;
        ctx.messages.push_back({"assistant", "kept " + candidate_line(c)});
      } else {
        slots.push_back(i);
        auto reason = prior->reasons.find(c.id);
        ctx.messages.push_back(
            {"user", "rejected " + candidate_line(c) +
                         (reason != prior->reasons.end() && !reason->second.empty() ? ": " + reason->second : "")});
        avoid.push_back(params_to_json(c.params));
      }
    }
    if (prior->more_diversity) ctx.messages.push_back({"user", std::string(kDiversityPrompt)});
    if (slots.empty()) return out;
  } else {
    for (std::size_t i = 0; i < n; ++i) slots.push_back(i);
  }
  json slot_numbers = json::array();
  for (auto s : slots) slot_numbers.push_back(s + 1);
  ctx.meta = {{"round", round}, {"count", slots.size()}, {"slots", slot_numbers}, {"avoid", avoid}};

  const auto reply = provider.complete("visualizer", ctx);
  if (reply.kind != ProviderReply::Kind::candidates) {
    throw ProviderError("protocol violation: visualizer must reply with candidates");
  }
  if (reply.candidates.size() != slots.size()) {
    throw ProviderError("protocol violation: expected " + std::to_string(slots.size()) + " candidates, got " +
                        std::to_string(reply.candidates.size()));
  }
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto slot = slots[k];
    Candidate c;
    c.id = "cand-" + std::to_string(round) + "-" + std::to_string(slot + 1);
    c.params = params_from_json(reply.candidates[k].params, c.id);
    c.descriptor = reply.candidates[k].descriptor;
    c.thumbnail = preview_thumbnail(c.params);
    out[slot] = std::move(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Planner

json ProceduralSpec::to_json() const {
  json numeric = json::object();
  for (const auto& [k, s] : numeric_scopes) numeric[k] = json::array({s.min, s.max});
  json categorical = json::object();
  for (const auto& [k, s] : categorical_scopes) categorical[k] = s;
  json steps = json::array();
  for (const auto& step : plan) {
    json j{{"description", step.description}, {"console_cmds", step.console_cmds}};
    if (step.expected_check) {
      j["expected_check"] = {{"query", step.expected_check->query}, {"contains", step.expected_check->contains}};
    }
    steps.push_back(std::move(j));
  }
  return {{"numeric_scopes", numeric}, {"categorical_scopes", categorical}, {"plan", steps}};
}

ProceduralSpec extract_scopes(const std::vector<Candidate>& selected) {
  if (selected.empty()) throw PlanError("selection is empty");
  ProceduralSpec spec;
  const auto& first = selected.front();
  for (const auto& c : selected) {
    bool same = c.params.size() == first.params.size();
    for (const auto& [name, v] : c.params) {
      auto it = first.params.find(name);
      same = same && it != first.params.end() && it->second.index() == v.index();
    }
    if (!same) {
      throw PlanError("heterogeneous parameter sets: " + candidate_line(first) + " vs " + candidate_line(c));
    }
    for (const auto& [name, v] : c.params) {
      if (const auto* d = std::get_if<double>(&v)) {
        auto [it, fresh] = spec.numeric_scopes.emplace(name, NumericScope{*d, *d});
        if (!fresh) {
          it->second.min = std::min(it->second.min, *d);
          it->second.max = std::max(it->second.max, *d);
        }
      } else {
        spec.categorical_scopes[name].insert(std::get<std::string>(v));
      }
    }
  }
  return spec;
}

std::vector<PlanStep> parse_plan(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error&) {
    throw PlanError("planner reply is not a JSON plan");
  }
  if (!doc.is_object() || !doc.contains("steps") || !doc["steps"].is_array()) {
    throw PlanError("plan needs a 'steps' array");
  }
  std::vector<PlanStep> steps;
  for (std::size_t i = 0; i < doc["steps"].size(); ++i) {
    const auto& s = doc["steps"][i];
    const auto where = "step " + std::to_string(i + 1);
    if (!s.is_object() || !s.contains("console_cmds") || !s["console_cmds"].is_array() || s["console_cmds"].empty()) {
      throw PlanError(where + ": needs a non-empty 'console_cmds' array");
    }
    PlanStep step;
    step.description = s.value("description", std::string());
    for (std::size_t c = 0; c < s["console_cmds"].size(); ++c) {
      const auto& cmd = s["console_cmds"][c];
      const auto cwhere = where + ", command " + std::to_string(c + 1);
      if (!cmd.is_string()) throw PlanError(cwhere + ": must be a string");
      const auto line = cmd.get<std::string>();
      if (line.find('\n') != std::string::npos) throw PlanError(cwhere + ": must be a single line");
      const auto parsed = dcc::parse_command(line);
      if (const auto* diag = std::get_if<dcc::Diagnostic>(&parsed)) throw PlanError(cwhere + ": " + diag->str());
      step.console_cmds.push_back(line);
    }
    if (s.contains("expected_check")) {
      const auto& chk = s["expected_check"];
      if (!chk.is_object() || !chk.contains("query") || !chk["query"].is_string() ||
          !chk.value("contains", json()).is_string()) {
        throw PlanError(where + ": expected_check needs string 'query' and 'contains'");
      }
      step.expected_check = ExpectedCheck{chk["query"], chk["contains"]};
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

ProceduralSpec plan_from_selection(Provider& planner, const std::string& prompt,
                                   const std::vector<Candidate>& selected) {
  auto spec = extract_scopes(selected);
  const auto scopes = spec.to_json();
  json ids = json::array();
  std::string listing;
  for (const auto& c : selected) {
    ids.push_back(c.id);
    listing += candidate_line(c) + "\n";
  }
  Context ctx;
  ctx.messages.push_back({"system",
                          "You are the Planner. Write a step-by-step console plan that builds the procedural model "
                          "for the selected candidates. Reply with JSON {\"steps\":[{\"description\",\"console_cmds\"}]}."});
  ctx.messages.push_back({"user", prompt});
  ctx.messages.push_back({"user", "Selected candidates:\n" + listing});
  ctx.messages.push_back({"user", "Parameter scopes: " + canonical_dump({{"numeric", scopes["numeric_scopes"]},
                                                                         {"categorical", scopes["categorical_scopes"]}})});
  ctx.meta = {{"candidates", ids}, {"numeric_scopes", scopes["numeric_scopes"]},
              {"categorical_scopes", scopes["categorical_scopes"]}};
  if (selected.size() == 1) ctx.meta["params"] = params_to_json(selected.front().params);
  const auto reply = planner.complete("planner", ctx);
  if (reply.kind != ProviderReply::Kind::text) throw PlanError("planner must reply with a JSON plan as text");
  spec.plan = parse_plan(reply.text);
  return spec;
}

// ---------------------------------------------------------------------------
// Manager

std::uint64_t compute_retry_budget(const RetryBudget& budget, std::uint64_t complexity) {
  if (budget.base < 1 || budget.cap < 1) throw std::invalid_argument("retry budget needs base >= 1 and cap >= 1");
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t extra = 0;
  if (budget.per_step != 0 && complexity > kMax / budget.per_step) {
    extra = kMax;
  } else {
    extra = budget.per_step * complexity;
  }
  const std::uint64_t total = extra > kMax - budget.base ? kMax : budget.base + extra;
  return std::min(budget.cap, total);
}

std::vector<std::uint64_t> ExecutionReport::attempts() const {
  std::vector<std::uint64_t> out;
  for (const auto& s : steps) out.push_back(s.attempts);
  return out;
}

json ExecutionReport::to_json() const {
  json steps_json = json::array();
  for (const auto& s : steps) {
    steps_json.push_back({{"index", s.index},
                          {"description", s.description},
                          {"budget", s.budget},
                          {"attempts", s.attempts},
                          {"succeeded", s.succeeded},
                          {"escalated", s.escalated},
                          {"errors", s.errors},
                          {"result", s.result}});
  }
  json j{{"steps", steps_json}, {"completed", completed}, {"snapshot_ref", snapshot_ref}};
  if (escalated_step) {
    j["escalated_step"] = *escalated_step;
    j["escalation_message"] = escalation_message;
  }
  return j;
}

ExecutionReport manage_execute(const ProceduralSpec& spec, mcp::Client& client, const RetryBudget& budget,
                               const ManageOptions& options) {
  if (spec.plan.empty()) throw PlanError("plan is empty");
  auto emit = [&](const StepEvent& e) {
    if (options.on_event) options.on_event(e);
  };
  ExecutionReport report;
  try {
    for (std::size_t i = 0; i < spec.plan.size(); ++i) {
      const auto& step = spec.plan[i];
      StepReport sr;
      sr.index = i;
      sr.description = step.description;
      sr.budget = compute_retry_budget(budget, step.console_cmds.size());
      auto cmds = step.console_cmds;
      for (std::uint64_t attempt = 1; attempt <= sr.budget && !sr.succeeded; ++attempt) {
        sr.attempts = attempt;
        std::string failure;
        try {
          const auto result = client.call_tool(kConsoleTool, {{"cmd", join_lines(cmds)}});
          if (result.is_error) {
            failure = result.text;
          } else if (step.expected_check) {
            const auto q = client.call_tool(kConsoleTool, {{"cmd", "query " + step.expected_check->query}});
            if (q.is_error || q.text.find(step.expected_check->contains) == std::string::npos) {
              failure = "check failed: query " + step.expected_check->query + " does not contain '" +
                        step.expected_check->contains + "'";
            } else {
              sr.result = result.text;
            }
          } else {
            sr.result = result.text;
          }
        } catch (const mcp::RemoteError& e) {
          failure = e.what();
        }
        if (failure.empty()) {
          sr.succeeded = true;
          emit({i, attempt, true, false, sr.result});
          break;
        }
        sr.errors.push_back(failure);
        emit({i, attempt, false, false, failure});
        if (attempt < sr.budget && options.manager) {
          Context ctx;
          ctx.messages.push_back({"system", "You are the Manager. Revise the console commands so the step succeeds."});
          ctx.messages.push_back({"user", "Step: " + step.description});
          ctx.messages.push_back({"assistant", join_lines(cmds)});
          ctx.messages.push_back({"tool", failure});
          ctx.meta = {{"step", i}, {"attempt", attempt}, {"error", failure}};
          try {
            const auto reply = options.manager->complete("manager", ctx);
            std::string revised;
            if (reply.kind == ProviderReply::Kind::tool_call && reply.tool_call.tool == kConsoleTool &&
                reply.tool_call.args.contains("cmd") && reply.tool_call.args["cmd"].is_string()) {
              revised = reply.tool_call.args["cmd"].get<std::string>();
            } else if (reply.kind == ProviderReply::Kind::text) {
              revised = reply.text;
            }
            if (!split_lines(revised).empty()) cmds = split_lines(revised);
          } catch (const ProviderError& e) {
            sr.errors.push_back(std::string("manager unavailable: ") + e.what());
          }
        }
      }
      if (!sr.succeeded) {
        sr.escalated = true;
        report.escalated_step = i;
        report.escalation_message = "step " + std::to_string(i + 1) + " (" + step.description + ") failed after " +
                                    std::to_string(sr.attempts) + " attempts: " +
                                    (sr.errors.empty() ? std::string("no attempts allowed") : sr.errors.back());
        emit({i, sr.attempts, false, true, report.escalation_message});
        report.steps.push_back(std::move(sr));
        break;
      }
      report.steps.push_back(std::move(sr));
    }
    report.completed = !report.escalated_step.has_value();
    report.final_snapshot = client.call_tool("get_scene_snapshot", json::object()).text;
  } catch (const mcp::RemoteError& e) {
    throw ExecutionError(std::string("DCC server error: ") + e.what());
  } catch (const mcp::TransportClosed& e) {
    throw ExecutionError(std::string("DCC transport failed: ") + e.what());
  } catch (const mcp::ClientError& e) {
    throw ExecutionError(std::string("DCC protocol failure: ") + e.what());
  }
  report.snapshot_ref = hex64(fnv1a_64(report.final_snapshot));
  return report;
}

DccConnection connect_embedded_dcc() {
  DccConnection c;
  c.store = std::make_shared<dcc::SceneStore>();
  c.server = std::make_unique<mcp::Server>(dcc::make_dcc_server(c.store));
  c.transport = std::make_unique<mcp::LoopbackTransport>(*c.server);
  c.client = std::make_unique<mcp::Client>(*c.transport, "3dify-manager");
  c.client->initialize();
  return c;
}

DccConnection connect_external_dcc(const std::string& endpoint) {
  DccConnection c;
  if (endpoint.rfind("tcp:", 0) == 0) {
    const auto rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) throw std::invalid_argument("expected tcp:host:port, got " + endpoint);
    c.transport = mcp::connect_tcp(rest.substr(0, colon), static_cast<std::uint16_t>(std::stoi(rest.substr(colon + 1))));
  } else if (endpoint.rfind("stdio:", 0) == 0) {
    std::istringstream in(endpoint.substr(6));
    std::vector<std::string> argv;
    for (std::string part; in >> part;) argv.push_back(part);
    if (argv.empty()) throw std::invalid_argument("expected stdio:<program> [args...]");
    c.transport = std::make_unique<mcp::ChildProcessTransport>(argv);
  } else {
    throw std::invalid_argument("unknown MCP endpoint '" + endpoint + "' (use tcp:host:port or stdio:<program>)");
  }
  c.client = std::make_unique<mcp::Client>(*c.transport, "3dify-manager");
  c.client->initialize();
  return c;
}

CuaOutcome run_cua_task(ComputerUseAgent& agent, const std::string& goal, const RetryBudget& budget,
                        std::uint64_t complexity) {
  CuaOutcome out;
  const auto limit = compute_retry_budget(budget, complexity);
  while (out.attempts < limit) {
    ++out.attempts;
    out.actions.push_back(agent.act("", goal));
    if (out.actions.back().kind != "unsupported") return out;
  }
  out.escalated = true;
  return out;
}

}  // namespace threedify::agents
