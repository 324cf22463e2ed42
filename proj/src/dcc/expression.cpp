#include "threedify/dcc/expression.hpp"

#include <array>
#include <charconv>

namespace threedify::dcc {

std::optional<ParamRef> ParamRef::split(std::string_view dotted) {
  const auto dot = dotted.rfind('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 == dotted.size()) {
    return std::nullopt;
  }
  return ParamRef{std::string(dotted.substr(0, dot)), std::string(dotted.substr(dot + 1))};
}

namespace {

void collect(const Expression& e, std::vector<ParamRef>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Expression::Reference>) {
          out.push_back(n.ref);
        } else if constexpr (std::is_same_v<T, Expression::Negate>) {
          collect(*n.operand, out);
        } else if constexpr (std::is_same_v<T, Expression::Binary>) {
          collect(*n.lhs, out);
          collect(*n.rhs, out);
        }
      },
      e.node());
}

int precedence(const Expression& e) {
  if (const auto* b = std::get_if<Expression::Binary>(&e.node())) {
    return (b->op == Expression::Op::add || b->op == Expression::Op::sub) ? 1 : 2;
  }
  return 3;
}

std::string shortest(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), end);
}

}  // namespace

std::vector<ParamRef> Expression::references() const {
  std::vector<ParamRef> out;
  collect(*this, out);
  return out;
}

double Expression::evaluate(const Resolver& resolve) const {
  return std::visit(
      [&](const auto& n) -> double {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, Reference>) {
          return resolve(n.ref);
        } else if constexpr (std::is_same_v<T, Negate>) {
          return -n.operand->evaluate(resolve);
        } else {
          const double a = n.lhs->evaluate(resolve);
          const double b = n.rhs->evaluate(resolve);
          switch (n.op) {
            case Op::add: return a + b;
            case Op::sub: return a - b;
            case Op::mul: return a * b;
            case Op::div:
              if (b == 0.0) throw EvalError("division by zero");
              return a / b;
          }
          return 0.0;
        }
      },
      node_);
}

std::string Expression::to_string() const {
  return std::visit(
      [&](const auto& n) -> std::string {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Literal>) {
          return shortest(n.value);
        } else if constexpr (std::is_same_v<T, Reference>) {
          return n.ref.str();
        } else if constexpr (std::is_same_v<T, Negate>) {
          const bool wrap = precedence(*n.operand) < 3 ||
                            std::holds_alternative<Negate>(n.operand->node()) ||
                            (std::holds_alternative<Literal>(n.operand->node()) &&
                             std::get<Literal>(n.operand->node()).value < 0);
          const auto inner = n.operand->to_string();
          return wrap ? "-(" + inner + ")" : "-" + inner;
        } else {
          const int mine = precedence(*this);
          auto lhs = n.lhs->to_string();
          auto rhs = n.rhs->to_string();
          if (precedence(*n.lhs) < mine) lhs = "(" + lhs + ")";
          if (precedence(*n.rhs) <= mine) rhs = "(" + rhs + ")";
          static constexpr std::array<const char*, 4> ops{" + ", " - ", " * ", " / "};
          return lhs + ops[static_cast<std::size_t>(n.op)] + rhs;
        }
      },
      node_);
}

}  // namespace threedify::dcc
