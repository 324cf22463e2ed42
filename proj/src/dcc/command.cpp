#include "threedify/dcc/command.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <optional>
#include <vector>

namespace threedify::dcc {

namespace {

constexpr std::array<std::pair<std::string_view, ObjectKind>, 6> kKinds{{
    {"cube", ObjectKind::cube},
    {"cylinder", ObjectKind::cylinder},
    {"plane", ObjectKind::plane},
    {"light", ObjectKind::light},
    {"group", ObjectKind::group},
    {"custom", ObjectKind::custom},
}};

bool is_alpha(char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

enum class Tok { word, number, string, equals, plus, minus, star, slash, lparen, rparen, end };

struct Token {
  Tok kind;
  std::string text;  // word text, decoded string, or number lexeme
  double number = 0.0;
  std::size_t column = 0;  // 1-based
};

std::variant<std::vector<Token>, Diagnostic> lex(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    const std::size_t col = i + 1;
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (is_alpha(c)) {
      std::size_t j = i + 1;
      while (j < line.size() && (is_alpha(line[j]) || is_digit(line[j]) || line[j] == '.')) ++j;
      out.push_back({Tok::word, std::string(line.substr(i, j - i)), 0.0, col});
      i = j;
      continue;
    }
    if (is_digit(c) || (c == '.' && i + 1 < line.size() && is_digit(line[i + 1]))) {
      std::size_t j = i;
      while (j < line.size() && is_digit(line[j])) ++j;
      if (j < line.size() && line[j] == '.') {
        ++j;
        while (j < line.size() && is_digit(line[j])) ++j;
      }
      if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < line.size() && (line[k] == '+' || line[k] == '-')) ++k;
        if (k < line.size() && is_digit(line[k])) {
          while (k < line.size() && is_digit(line[k])) ++k;
          j = k;
        }
      }
      if (j < line.size() && (is_alpha(line[j]) || line[j] == '.')) {
        return Diagnostic{"malformed number", col};
      }
      const auto lexeme = line.substr(i, j - i);
      double value = 0.0;
      // from_chars rejects a leading '.', so parse "0" + lexeme in that case.
      const std::string buf = lexeme.front() == '.' ? "0" + std::string(lexeme) : std::string(lexeme);
      auto [ptr, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), value);
      if (ec != std::errc{} || ptr != buf.data() + buf.size() || !std::isfinite(value)) {
        return Diagnostic{"number out of range", col};
      }
      out.push_back({Tok::number, std::string(lexeme), value, col});
      i = j;
      continue;
    }
    if (c == '"') {
      std::string text;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < line.size()) {
        const char d = line[j];
        if (d == '"') {
          closed = true;
          ++j;
          break;
        }
        if (d == '\\') {
          if (j + 1 >= line.size()) break;
          const char e = line[j + 1];
          if (e == '"' || e == '\\') {
            text.push_back(e);
          } else if (e == 'n') {
            text.push_back('\n');
          } else {
            return Diagnostic{"unknown escape sequence", j + 1};
          }
          j += 2;
          continue;
        }
        text.push_back(d);
        ++j;
      }
      if (!closed) return Diagnostic{"unterminated string", col};
      out.push_back({Tok::string, std::move(text), 0.0, col});
      i = j;
      continue;
    }
    Tok kind;
    switch (c) {
      case '=': kind = Tok::equals; break;
      case '+': kind = Tok::plus; break;
      case '-': kind = Tok::minus; break;
      case '*': kind = Tok::star; break;
      case '/': kind = Tok::slash; break;
      case '(': kind = Tok::lparen; break;
      case ')': kind = Tok::rparen; break;
      default: return Diagnostic{"unexpected character", col};
    }
    out.push_back({kind, std::string(1, c), 0.0, col});
    ++i;
  }
  out.push_back({Tok::end, "", 0.0, line.size() + 1});
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  ParseResult parse() {
    try {
      auto cmd = command();
      if (peek().kind != Tok::end) fail("unexpected trailing input", peek());
      return cmd;
    } catch (const Failure& f) {
      return f.diag;
    }
  }

 private:
  struct Failure {
    Diagnostic diag;
  };

  static constexpr int kMaxDepth = 64;

  [[noreturn]] static void fail(std::string message, const Token& at) {
    throw Failure{Diagnostic{std::move(message), at.column}};
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (t.kind != Tok::end) ++pos_;
    return t;
  }

  Command command() {
    const Token& verb = next();
    if (verb.kind == Tok::end) fail("empty command", verb);
    if (verb.kind != Tok::word) fail("expected a command verb", verb);
    const auto& v = verb.text;
    if (v == "add") return add();
    if (v == "set") {
      auto target = param_ref();
      return SetCommand{std::move(target), value()};
    }
    if (v == "link") {
      auto target = param_ref();
      const Token& eq = next();
      if (eq.kind != Tok::equals) fail("expected '='", eq);
      auto e = expr(0);
      return LinkCommand{std::move(target), std::move(e)};
    }
    if (v == "delete") return DeleteCommand{object_name()};
    if (v == "query") return QueryCommand{object_name()};
    if (v == "snapshot") return SnapshotCommand{};
    if (v == "render_summary") return RenderSummaryCommand{};
    fail("unknown command '" + v + "'", verb);
  }

  Command add() {
    const Token& kind_tok = next();
    if (kind_tok.kind != Tok::word) fail("expected object kind", kind_tok);
    const auto kind = parse_object_kind(kind_tok.text);
    if (!kind) {
      fail("unknown object kind '" + kind_tok.text +
               "' (expected cube, cylinder, plane, light, group or custom)",
           kind_tok);
    }
    AddCommand cmd{*kind, object_name(), {}};
    while (peek().kind != Tok::end) {
      const Token& key = next();
      if (key.kind != Tok::word || !is_valid_param_name(key.text)) {
        fail("expected parameter name", key);
      }
      const Token& eq = next();
      if (eq.kind != Tok::equals) fail("expected '=' after parameter name", eq);
      auto val = value();
      if (!cmd.params.emplace(key.text, std::move(val)).second) {
        fail("duplicate parameter '" + key.text + "'", key);
      }
    }
    return cmd;
  }

  std::string object_name() {
    const Token& t = next();
    if (t.kind != Tok::word) fail("expected object name", t);
    if (!is_valid_object_name(t.text)) fail("invalid object name", t);
    return t.text;
  }

  ParamRef param_ref() {
    const Token& t = next();
    if (t.kind != Tok::word) fail("expected <object>.<param>", t);
    auto ref = ParamRef::split(t.text);
    if (!ref || !is_valid_object_name(ref->object) || !is_valid_param_name(ref->param)) {
      fail("expected <object>.<param>", t);
    }
    return *ref;
  }

  ParamValue value() {
    const Token& t = next();
    switch (t.kind) {
      case Tok::number: return t.number;
      case Tok::string: return t.text;
      case Tok::word: return t.text;
      case Tok::minus: {
        const Token& n = next();
        if (n.kind != Tok::number) fail("expected number after '-'", n);
        return -n.number;
      }
      default: fail("expected value", t);
    }
  }

  Expression expr(int depth) {
    auto lhs = term(depth);
    while (peek().kind == Tok::plus || peek().kind == Tok::minus) {
      const auto op = next().kind == Tok::plus ? Expression::Op::add : Expression::Op::sub;
      auto rhs = term(depth);
      lhs = Expression(Expression::Binary{op, std::make_shared<const Expression>(std::move(lhs)),
                                          std::make_shared<const Expression>(std::move(rhs))});
    }
    return lhs;
  }

  Expression term(int depth) {
    auto lhs = unary(depth);
    while (peek().kind == Tok::star || peek().kind == Tok::slash) {
      const auto op = next().kind == Tok::star ? Expression::Op::mul : Expression::Op::div;
      auto rhs = unary(depth);
      lhs = Expression(Expression::Binary{op, std::make_shared<const Expression>(std::move(lhs)),
                                          std::make_shared<const Expression>(std::move(rhs))});
    }
    return lhs;
  }

  Expression unary(int depth) {
    if (depth > kMaxDepth) fail("expression nested too deeply", peek());
    if (peek().kind == Tok::minus) {
      next();
      return Expression(Expression::Negate{std::make_shared<const Expression>(unary(depth + 1))});
    }
    return primary(depth);
  }

  Expression primary(int depth) {
    const Token& t = next();
    switch (t.kind) {
      case Tok::number: return Expression::literal(t.number);
      case Tok::word: {
        auto ref = ParamRef::split(t.text);
        if (!ref || !is_valid_object_name(ref->object) || !is_valid_param_name(ref->param)) {
          fail("expected <object>.<param> reference", t);
        }
        return Expression::reference(std::move(*ref));
      }
      case Tok::lparen: {
        auto inner = expr(depth + 1);
        const Token& close = next();
        if (close.kind != Tok::rparen) fail("expected ')'", close);
        return inner;
      }
      default: fail("expected number, reference or '('", t);
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(ObjectKind kind) {
  for (const auto& [name, k] : kKinds) {
    if (k == kind) return name;
  }
  return "custom";
}

std::optional<ObjectKind> parse_object_kind(std::string_view text) {
  for (const auto& [name, k] : kKinds) {
    if (name == text) return k;
  }
  return std::nullopt;
}

std::string Diagnostic::str() const {
  return "column " + std::to_string(column) + ": " + message;
}

bool is_valid_object_name(std::string_view name) {
  if (name.empty() || !is_alpha(name.front())) return false;
  for (char c : name) {
    if (!is_alpha(c) && !is_digit(c) && c != '.') return false;
  }
  return true;
}

bool is_valid_param_name(std::string_view name) {
  if (name.empty() || !is_alpha(name.front())) return false;
  for (char c : name) {
    if (!is_alpha(c) && !is_digit(c)) return false;
  }
  return true;
}

ParseResult parse_command(std::string_view line) {
  auto lexed = lex(line);
  if (auto* diag = std::get_if<Diagnostic>(&lexed)) return *diag;
  return Parser(std::get<std::vector<Token>>(std::move(lexed))).parse();
}

}  // namespace threedify::dcc
