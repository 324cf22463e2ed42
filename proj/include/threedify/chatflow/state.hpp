#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "threedify/common/canonical.hpp"

namespace threedify::chatflow {

/// Conversation variables are String, Number or Array[String].
using VarValue = std::variant<std::string, double, std::vector<std::string>>;

std::string value_to_text(const VarValue& value);
json value_to_json(const VarValue& value);
VarValue value_from_json(const json& j);

class StateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by to_next_stage when the last stage has been consumed; the session
/// pipeline treats it as "session complete".
class TerminalStageError : public StateError {
 public:
  using StateError::StateError;
};

/// The per-session variable set that survives between turns: multi-agent
/// stage dispatch, the inspection loop budget, and user-declared variables.
///
/// Invariants at every turn boundary (checked by validate()):
///   stage == stages[stage_num], 0 <= stage_num < stages.size()
///   (an empty stage list pins stage_num = 0 and stage = ""),
///   dirty_bit and enable_increment in {0, 1},
///   0 <= remaining_inspection_count <= max_inspection_count.
struct ConversationState {
  std::string stage;
  int dirty_bit = 0;
  int enable_increment = 1;
  std::size_t stage_num = 0;
  std::vector<std::string> stages;
  std::int64_t max_inspection_count = 0;
  std::int64_t remaining_inspection_count = 0;
  std::map<std::string, VarValue> user_vars;

  static bool is_builtin(std::string_view name);

  /// Built-ins and user variables under one namespace.
  std::optional<VarValue> get(std::string_view name) const;
  /// Type-checked write. Built-ins keep their declared types; user variables
  /// keep the type of their initial value. Does not check cross-field
  /// invariants, which only need to hold at turn boundaries.
  void set(std::string_view name, const VarValue& value);

  std::vector<std::string> variable_names() const;

  void validate() const;

  /// The `conversation_variables` object of a workflow document.
  json to_json() const;
  static ConversationState from_json(const json& vars);

  friend bool operator==(const ConversationState&, const ConversationState&) = default;
};

/// Auto-advance: increments stage_num only when dirty_bit == 0 and
/// enable_increment == 1; always returns dirty_bit == 0.
ConversationState to_next_stage(ConversationState state);

/// Explicit dispatch to a named stage; marks dirty_bit so the next
/// to_next_stage does not advance past it.
ConversationState set_stage(ConversationState state, std::string_view stage_name);

struct InspectionStep {
  ConversationState state;
  bool at_budget = false;
};

/// One Builder-Inspector iteration consumed. Decrementing at zero is a no-op
/// that still reports at_budget.
InspectionStep decrement_inspection(ConversationState state);

ConversationState reset_inspection(ConversationState state);

}  // namespace threedify::chatflow
