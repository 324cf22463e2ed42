#include "threedify/chatflow/state.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace threedify::chatflow {

namespace {

constexpr std::array<std::string_view, 7> kBuiltins{
    "stage", "dirty_bit", "enable_increment", "stage_num", "stages", "max_inspection_count",
    "remaining_inspection_count"};

std::string type_name(const VarValue& v) {
  switch (v.index()) {
    case 0: return "string";
    case 1: return "number";
    default: return "array[string]";
  }
}

std::int64_t as_count(std::string_view name, const VarValue& value) {
  const auto* d = std::get_if<double>(&value);
  if (!d) throw StateError(std::string(name) + " expects a number, got " + type_name(value));
  if (!std::isfinite(*d) || std::floor(*d) != *d || *d < 0 || *d > 9.0e15) {
    throw StateError(std::string(name) + " must be a non-negative integer, got " + format_number(*d));
  }
  return static_cast<std::int64_t>(*d);
}

int as_flag(std::string_view name, const VarValue& value) {
  const auto v = as_count(name, value);
  if (v > 1) throw StateError(std::string(name) + " must be 0 or 1");
  return static_cast<int>(v);
}

}  // namespace

std::string value_to_text(const VarValue& value) {
  switch (value.index()) {
    case 0: return std::get<std::string>(value);
    case 1: return format_number(std::get<double>(value));
    default: return canonical_dump(value_to_json(value));
  }
}

json value_to_json(const VarValue& value) {
  switch (value.index()) {
    case 0: return std::get<std::string>(value);
    case 1: return std::get<double>(value);
    default: return std::get<std::vector<std::string>>(value);
  }
}

VarValue value_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_string(); })) {
    return j.get<std::vector<std::string>>();
  }
  throw StateError("conversation variables must be string, number or array of strings");
}

bool ConversationState::is_builtin(std::string_view name) {
  return std::find(kBuiltins.begin(), kBuiltins.end(), name) != kBuiltins.end();
}

std::optional<VarValue> ConversationState::get(std::string_view name) const {
  if (name == "stage") return stage;
  if (name == "dirty_bit") return static_cast<double>(dirty_bit);
  if (name == "enable_increment") return static_cast<double>(enable_increment);
  if (name == "stage_num") return static_cast<double>(stage_num);
  if (name == "stages") return stages;
  if (name == "max_inspection_count") return static_cast<double>(max_inspection_count);
  if (name == "remaining_inspection_count") return static_cast<double>(remaining_inspection_count);
  auto it = user_vars.find(std::string(name));
  if (it == user_vars.end()) return std::nullopt;
  return it->second;
}

void ConversationState::set(std::string_view name, const VarValue& value) {
  if (name == "stage") {
    const auto* s = std::get_if<std::string>(&value);
    if (!s) throw StateError("stage expects a string, got " + type_name(value));
    stage = *s;
  } else if (name == "dirty_bit") {
    dirty_bit = as_flag(name, value);
  } else if (name == "enable_increment") {
    enable_increment = as_flag(name, value);
  } else if (name == "stage_num") {
    stage_num = static_cast<std::size_t>(as_count(name, value));
  } else if (name == "stages") {
    const auto* list = std::get_if<std::vector<std::string>>(&value);
    if (!list) throw StateError("stages expects an array of strings, got " + type_name(value));
    stages = *list;
  } else if (name == "max_inspection_count") {
    max_inspection_count = as_count(name, value);
  } else if (name == "remaining_inspection_count") {
    remaining_inspection_count = as_count(name, value);
  } else {
    auto it = user_vars.find(std::string(name));
    if (it == user_vars.end()) throw StateError("unknown conversation variable '" + std::string(name) + "'");
    if (it->second.index() != value.index()) {
      throw StateError("conversation variable '" + std::string(name) + "' is " + type_name(it->second) +
                       ", cannot assign " + type_name(value));
    }
    it->second = value;
  }
}

std::vector<std::string> ConversationState::variable_names() const {
  std::vector<std::string> names(kBuiltins.begin(), kBuiltins.end());
  for (const auto& [name, value] : user_vars) names.push_back(name);
  return names;
}

void ConversationState::validate() const {
  if (stages.empty()) {
    if (stage_num != 0 || !stage.empty()) throw StateError("no stages declared, so stage must be empty");
  } else {
    if (stage_num >= stages.size()) {
      throw StateError("stage_num " + std::to_string(stage_num) + " out of range for " +
                       std::to_string(stages.size()) + " stages");
    }
    if (stage != stages[stage_num]) {
      throw StateError("stage '" + stage + "' does not match stages[" + std::to_string(stage_num) + "] = '" +
                       stages[stage_num] + "'");
    }
  }
  if (dirty_bit != 0 && dirty_bit != 1) throw StateError("dirty_bit must be 0 or 1");
  if (enable_increment != 0 && enable_increment != 1) throw StateError("enable_increment must be 0 or 1");
  if (max_inspection_count < 0 || remaining_inspection_count < 0 ||
      remaining_inspection_count > max_inspection_count) {
    throw StateError("remaining_inspection_count must lie in [0, max_inspection_count]");
  }
}

json ConversationState::to_json() const {
  json vars = json::object();
  for (const auto& name : variable_names()) vars[name] = value_to_json(*get(name));
  return vars;
}

ConversationState ConversationState::from_json(const json& vars) {
  if (!vars.is_object()) throw StateError("conversation_variables must be an object");
  ConversationState state;
  bool has_stage = false;
  for (const auto& [name, raw] : vars.items()) {
    const auto value = value_from_json(raw);
    if (is_builtin(name)) {
      state.set(name, value);
      has_stage = has_stage || name == "stage";
    } else {
      state.user_vars.emplace(name, value);
    }
  }
  if (!has_stage && !state.stages.empty() && state.stage_num < state.stages.size()) {
    state.stage = state.stages[state.stage_num];
  }
  if (!vars.contains("remaining_inspection_count")) {
    state.remaining_inspection_count = state.max_inspection_count;
  }
  state.validate();
  return state;
}

ConversationState to_next_stage(ConversationState state) {
  if (state.dirty_bit == 0 && state.enable_increment == 1) {
    if (state.stage_num + 1 >= state.stages.size()) {
      throw TerminalStageError("session complete: no stage after '" + state.stage + "'");
    }
    ++state.stage_num;
  }
  state.dirty_bit = 0;
  if (!state.stages.empty()) {
    if (state.stage_num >= state.stages.size()) {
      throw StateError("stage_num " + std::to_string(state.stage_num) + " out of range");
    }
    state.stage = state.stages[state.stage_num];
  }
  return state;
}

ConversationState set_stage(ConversationState state, std::string_view stage_name) {
  auto it = std::find(state.stages.begin(), state.stages.end(), stage_name);
  if (it == state.stages.end()) {
    std::string valid;
    for (const auto& s : state.stages) valid += (valid.empty() ? "" : ", ") + ("\"" + s + "\"");
    throw StateError("unknown stage \"" + std::string(stage_name) + "\"; valid stages: " + valid);
  }
  state.stage_num = static_cast<std::size_t>(it - state.stages.begin());
  state.stage = *it;
  state.dirty_bit = 1;
  return state;
}

InspectionStep decrement_inspection(ConversationState state) {
  if (state.remaining_inspection_count > 0) --state.remaining_inspection_count;
  const bool at_budget = state.remaining_inspection_count == 0;
  return {std::move(state), at_budget};
}

ConversationState reset_inspection(ConversationState state) {
  state.remaining_inspection_count = state.max_inspection_count;
  return state;
}

}  // namespace threedify::chatflow
