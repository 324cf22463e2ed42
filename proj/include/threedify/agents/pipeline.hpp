#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "threedify/agents/provider.hpp"
#include "threedify/dcc/dcc_server.hpp"
#include "threedify/mcp/client.hpp"

namespace threedify::agents {

// ---------------------------------------------------------------------------
// Visualizer

struct Candidate {
  std::string id;
  std::map<std::string, dcc::ParamValue> params;
  std::string descriptor;
  std::string thumbnail;  // SVG

  json to_json() const;
  static Candidate from_json(const json& j);
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

using CandidateSet = std::vector<Candidate>;

json params_to_json(const std::map<std::string, dcc::ParamValue>& params);

/// A one-object preview scene holding the candidate's params, rendered with
/// the simulator's thumbnail renderer.
std::string preview_thumbnail(const std::map<std::string, dcc::ParamValue>& params);

/// What the user said about the previous round.
struct SelectionFeedback {
  CandidateSet previous;
  std::set<std::string> selected;
  std::map<std::string, std::string> reasons;  // rejected id -> reason
  bool more_diversity = false;
};

inline constexpr std::string_view kDiversityPrompt =
    "The user finds the candidates too similar. Introduce more diversity in the new candidates.";

/// Exactly n candidates with ids "cand-<round>-<slot>". With `prior`, the
/// selected slots are copied verbatim and only rejected slots are
/// regenerated, in one provider call whose context carries the reasons.
CandidateSet visualize_candidates(Provider& provider, const std::string& prompt, std::size_t n, int round,
                                  const std::optional<SelectionFeedback>& prior = std::nullopt);

// ---------------------------------------------------------------------------
// Planner

struct ExpectedCheck {
  std::string query;     // object name
  std::string contains;  // substring the query output must contain
};

struct PlanStep {
  std::string description;
  std::vector<std::string> console_cmds;
  std::optional<ExpectedCheck> expected_check;
};

struct NumericScope {
  double min = 0.0;
  double max = 0.0;
  friend bool operator==(const NumericScope&, const NumericScope&) = default;
};

struct ProceduralSpec {
  std::map<std::string, NumericScope> numeric_scopes;
  std::map<std::string, std::set<std::string>> categorical_scopes;
  std::vector<PlanStep> plan;

  json to_json() const;
};

class PlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Min/max per numeric param and the observed value set per categorical
/// param. Throws PlanError on an empty or heterogeneous selection.
ProceduralSpec extract_scopes(const std::vector<Candidate>& selected);

/// Parses the planner's JSON plan ({"steps":[...]}) and checks that every
/// console command parses; errors name the step (1-based).
std::vector<PlanStep> parse_plan(const std::string& text);

/// extract_scopes plus a plan authored by the planner provider.
ProceduralSpec plan_from_selection(Provider& planner, const std::string& prompt,
                                   const std::vector<Candidate>& selected);

// ---------------------------------------------------------------------------
// Manager

struct RetryBudget {
  std::uint64_t base = 1;
  std::uint64_t per_step = 1;
  std::uint64_t cap = 4;
};

/// min(cap, base + per_step * complexity). Throws std::invalid_argument
/// unless base >= 1 and cap >= 1.
std::uint64_t compute_retry_budget(const RetryBudget& budget, std::uint64_t complexity);

struct StepReport {
  std::size_t index = 0;  // 0-based
  std::string description;
  std::uint64_t budget = 0;
  std::uint64_t attempts = 0;
  bool succeeded = false;
  bool escalated = false;
  std::vector<std::string> errors;
  std::string result;  // console output of the successful attempt
};

struct ExecutionReport {
  std::vector<StepReport> steps;
  bool completed = false;
  std::optional<std::size_t> escalated_step;
  std::string escalation_message;
  std::string final_snapshot;
  std::string snapshot_ref;  // hex FNV-1a-64 of final_snapshot

  std::vector<std::uint64_t> attempts() const;
  json to_json() const;
};

struct StepEvent {
  std::size_t step = 0;
  std::uint64_t attempt = 0;
  bool ok = false;
  bool escalated = false;
  std::string message;
};

struct ManageOptions {
  /// Consulted after a failed attempt for revised commands; without one the
  /// same commands are retried.
  Provider* manager = nullptr;
  std::function<void(const StepEvent&)> on_event;
};

/// Transport-level failure, as opposed to a step that failed on the server.
class ExecutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kConsoleTool = "run_cmd_on_default_console";

/// Runs each step's commands as one console transaction. A failed step is
/// retried up to compute_retry_budget(budget, command count); exhausting it
/// marks the step escalated and halts the plan.
ExecutionReport manage_execute(const ProceduralSpec& spec, mcp::Client& client, const RetryBudget& budget,
                               const ManageOptions& options = {});

/// An initialized client bound to a DCC MCP server.
struct DccConnection {
  std::shared_ptr<dcc::SceneStore> store;  // set for the embedded simulator
  std::unique_ptr<mcp::Server> server;
  std::unique_ptr<mcp::Transport> transport;
  std::unique_ptr<mcp::Client> client;
};

/// Fresh simulator scene served in-process over a loopback transport.
DccConnection connect_embedded_dcc();
/// "tcp:host:port" or "stdio:<program> [args...]".
DccConnection connect_external_dcc(const std::string& endpoint);

// ---------------------------------------------------------------------------
// Computer-using agent seam

struct UiAction {
  std::string kind;  // "click", "type", "key", "unsupported"
  json detail = json::object();
};

class ComputerUseAgent {
 public:
  virtual ~ComputerUseAgent() = default;
  virtual UiAction act(const std::string& screenshot_png_base64, const std::string& goal) = 0;
};

/// The only backend shipped: reports that screen driving is unavailable.
class UnsupportedCua : public ComputerUseAgent {
 public:
  UiAction act(const std::string&, const std::string& goal) override {
    return {"unsupported", {{"goal", goal}, {"message", "computer-use backend not available"}}};
  }
};

struct CuaOutcome {
  std::uint64_t attempts = 0;
  bool escalated = false;
  std::vector<UiAction> actions;
};

/// Asks the agent for actions until it returns a non-"unsupported" action or
/// the retry budget is spent.
CuaOutcome run_cua_task(ComputerUseAgent& agent, const std::string& goal, const RetryBudget& budget,
                        std::uint64_t complexity);

}  // namespace threedify::agents
