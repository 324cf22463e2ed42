#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <variant>

#include "threedify/dcc/expression.hpp"

namespace threedify::dcc {

enum class ObjectKind { cube, cylinder, plane, light, group, custom };

std::string_view to_string(ObjectKind kind);
std::optional<ObjectKind> parse_object_kind(std::string_view text);

using ParamValue = std::variant<double, std::string>;

struct AddCommand {
  ObjectKind kind;
  std::string name;
  std::map<std::string, ParamValue> params;
};
struct SetCommand {
  ParamRef target;
  ParamValue value;
};
struct LinkCommand {
  ParamRef target;
  Expression expression;
};
struct DeleteCommand {
  std::string name;
};
struct QueryCommand {
  std::string name;
};
struct SnapshotCommand {};
struct RenderSummaryCommand {};

using Command = std::variant<AddCommand, SetCommand, LinkCommand, DeleteCommand,
                             QueryCommand, SnapshotCommand, RenderSummaryCommand>;

/// `column` is 1-based; a column one past the end of the line means the
/// input ended where more was expected.
struct Diagnostic {
  std::string message;
  std::size_t column = 0;

  std::string str() const;
};

using ParseResult = std::variant<Command, Diagnostic>;

/// Total over arbitrary bytes: every input yields a Command or a Diagnostic.
ParseResult parse_command(std::string_view line);

bool is_valid_object_name(std::string_view name);
bool is_valid_param_name(std::string_view name);

}  // namespace threedify::dcc
