#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace threedify::dcc {

/// `object.param`. Object names may themselves contain dots, so the split is
/// always at the last one.
struct ParamRef {
  std::string object;
  std::string param;

  std::string str() const { return object + "." + param; }
  static std::optional<ParamRef> split(std::string_view dotted);

  friend auto operator<=>(const ParamRef&, const ParamRef&) = default;
};

class Expression {
 public:
  enum class Op { add, sub, mul, div };

  struct Literal {
    double value;
  };
  struct Reference {
    ParamRef ref;
  };
  struct Negate {
    std::shared_ptr<const Expression> operand;
  };
  struct Binary {
    Op op;
    std::shared_ptr<const Expression> lhs;
    std::shared_ptr<const Expression> rhs;
  };
  using Node = std::variant<Literal, Reference, Negate, Binary>;

  explicit Expression(Node node) : node_(std::move(node)) {}

  static Expression literal(double v) { return Expression(Literal{v}); }
  static Expression reference(ParamRef r) { return Expression(Reference{std::move(r)}); }

  const Node& node() const { return node_; }

  /// References in left-to-right order, duplicates kept.
  std::vector<ParamRef> references() const;

  using Resolver = std::function<double(const ParamRef&)>;

  /// Throws EvalError on division by zero.
  double evaluate(const Resolver& resolve) const;

  /// Fully parenthesised only where precedence requires it; parses back to
  /// an equal tree.
  std::string to_string() const;

 private:
  Node node_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace threedify::dcc
