#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "threedify/chatflow/state.hpp"

namespace threedify::chatflow {

enum class NodeKind { start, answer, assigner, function, branch, retrieval, agent_call, tool_call };

std::string_view to_string(NodeKind kind);
std::optional<NodeKind> parse_node_kind(std::string_view text);

/// One write performed by an Assigner node. The value is either a literal or
/// a reference (`from`) to a scratch value or another conversation variable.
struct Assignment {
  enum class Op { set, append, clear };
  std::string variable;
  Op op = Op::set;
  std::optional<VarValue> value;
  std::string from;
};

/// Kind-specific configuration is parsed and validated at load time. Text
/// fields are templates: `{{sys.query}}`, `{{conv.<variable>}}` and
/// `{{<node-id>.<output>}}` are substituted at run time.
struct Node {
  std::string id;
  NodeKind kind = NodeKind::answer;

  std::string text;                          // answer text, agent prompt, retrieval query
  std::vector<Assignment> assignments;       // assigner
  std::string function;                      // function
  std::map<std::string, std::string> args;   // function arguments (templates)
  std::string on;                            // branch: reference to switch on
  bool match_stage = false;                  // branch: value must be one of `stages`
  std::vector<std::string> cases;            // branch
  std::string role;                          // agent_call
  std::string tool;                          // tool_call
  json tool_args = json::object();           // tool_call: string leaves are templates
  int top_k = 3;                             // retrieval
};

/// Functions a Function node may run, with their scratch outputs.
///   to_next_stage                -> stage, stage_num, dirty_bit, complete
///   set_stage(stage)             -> stage, stage_num, dirty_bit
///   decrement_inspection         -> remaining_inspection_count, at_budget
///   reset_inspection             -> remaining_inspection_count
///   template(template)           -> output
///   add(a, b)                    -> output
///   equals(a, b)                 -> output (1 or 0)
///   contains(haystack, needle)   -> output (1 or 0)
const std::map<std::string, std::vector<std::string>>& function_catalog();

struct Workflow {
  std::string name;
  std::map<std::string, Node> nodes;
  /// (node id, branch label) -> successor. Non-branch nodes use "next".
  std::map<std::pair<std::string, std::string>, std::string> edges;
  std::string start;
  ConversationState initial_state;

  const std::string* successor(const std::string& node, const std::string& label) const;
};

class WorkflowError : public std::runtime_error {
 public:
  explicit WorkflowError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

/// All problems found in a workflow document, each naming the offending
/// node or edge. Empty means load_workflow will succeed.
std::vector<std::string> validate_workflow(const json& document);

/// Throws WorkflowError (validation) or json::parse_error (syntax).
Workflow load_workflow(const json& document);
Workflow load_workflow_file(const std::filesystem::path& path);

/// Resolves `templates/3dify-main` style paths: the path itself, then with
/// ".json" appended, then `<path>/workflow.json`.
std::filesystem::path resolve_workflow_path(const std::filesystem::path& path);

struct TurnServices {
  std::function<std::string(const std::string& query, int top_k)> retrieve;
  std::function<std::string(const std::string& role, const std::string& prompt)> agent;
  std::function<std::string(const std::string& tool, const json& args)> call_tool;
};

struct TurnOptions {
  std::size_t max_node_visits = 1000;
};

struct TurnResult {
  std::string output_text;
  ConversationState new_state;
  std::vector<std::string> trace;
};

/// Node-visit budget exhaustion, callback failure, bad branch value or an
/// invariant violated at the end of the turn.
class TurnError : public std::runtime_error {
 public:
  TurnError(std::string node, const std::string& message)
      : std::runtime_error("node '" + node + "': " + message), node_(std::move(node)) {}
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

/// Interprets one turn from Start to an Answer node. Scratch values vanish
/// at the end of the turn; only Assigner writes reach new_state.
TurnResult run_turn(const Workflow& workflow, const ConversationState& state, std::string_view user_input,
                    const TurnServices& services, const TurnOptions& options = {});

}  // namespace threedify::chatflow
