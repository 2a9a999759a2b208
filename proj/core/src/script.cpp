#include "cristal/script.hpp"

#include <cctype>

#include "cristal/errors.hpp"
#include "cristal/values.hpp"

namespace cristal {

ScriptValue ScriptValue::string(std::string v) {
  return {Type::String, std::move(v)};
}

ScriptValue ScriptValue::decimal(std::string v) {
  auto d = Decimal::parse(v);
  if (!d) fail("EvaluationError", "not a decimal literal: " + v);
  return {Type::Decimal, d->str()};
}

ScriptValue ScriptValue::boolean(bool v) {
  return {Type::Boolean, v ? "true" : "false"};
}

bool ScriptValue::as_bool() const {
  if (type != Type::Boolean) {
    fail("EvaluationError", "expected a boolean, got '" + text + "'");
  }
  return text == "true";
}

struct Script::Expr {
  enum class Op { Literal, Prop, Field, Input, Compare, Add, And, Or, Not };
  Op op = Op::Literal;
  ScriptValue literal;
  std::string cmp;                    // Compare only: == != < <= > >=
  std::vector<std::string> names;    // Prop/Field/Input string arguments
  int slot = 0;                      // Input
  std::vector<std::shared_ptr<const Expr>> args;
};

namespace {

using Expr = Script::Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Token {
  enum class Kind { End, Ident, String, Number, Op };
  Kind kind = Kind::End;
  std::string text;
  size_t offset = 0;
};

class Lexer {
public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& current() const { return tok_; }

  void advance() {
    while (pos_ < src_.size() &&
           std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      ++pos_;
    }
    tok_ = Token{};
    tok_.offset = pos_;
    if (pos_ >= src_.size()) return;
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_' || src_[pos_] == '/')) {
        ++pos_;
      }
      tok_.kind = Token::Kind::Ident;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
      size_t start = pos_;
      if (c == '-') ++pos_;
      while (pos_ < src_.size() &&
             (std::isdigit(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '.')) {
        ++pos_;
      }
      tok_.kind = Token::Kind::Number;
      tok_.text = std::string(src_.substr(start, pos_ - start));
      return;
    }
    if (c == '"') {
      size_t end = src_.find('"', pos_ + 1);
      if (end == std::string_view::npos) {
        fail("MalformedScript",
             "unterminated string at offset " + std::to_string(pos_));
      }
      tok_.kind = Token::Kind::String;
      tok_.text = std::string(src_.substr(pos_ + 1, end - pos_ - 1));
      pos_ = end + 1;
      return;
    }
    static constexpr std::string_view two_char[] = {"==", "!=", "<=", ">=", ":="};
    for (std::string_view op : two_char) {
      if (src_.substr(pos_, 2) == op) {
        tok_.kind = Token::Kind::Op;
        tok_.text = std::string(op);
        pos_ += 2;
        return;
      }
    }
    if (c == '<' || c == '>' || c == '+' || c == '(' || c == ')' || c == ',' ||
        c == ';') {
      tok_.kind = Token::Kind::Op;
      tok_.text = std::string(1, c);
      ++pos_;
      return;
    }
    fail("MalformedScript", std::string("unexpected character '") + c +
                                "' at offset " + std::to_string(pos_));
  }

private:
  std::string_view src_;
  size_t pos_ = 0;
  Token tok_;
};

class Parser {
public:
  explicit Parser(std::string_view src) : lex_(src) {}

  ExprPtr parse_expression() { return parse_or(); }

  bool at_end() const { return lex_.current().kind == Token::Kind::End; }
  bool at_op(std::string_view op) const {
    return lex_.current().kind == Token::Kind::Op && lex_.current().text == op;
  }
  bool at_assign_target() {
    return lex_.current().kind == Token::Kind::Ident;
  }
  const Token& current() const { return lex_.current(); }
  void next() { lex_.advance(); }

  void expect_op(std::string_view op) {
    if (!at_op(op)) {
      fail("MalformedScript", "expected '" + std::string(op) + "' at offset " +
                                  std::to_string(lex_.current().offset));
    }
    next();
  }

private:
  Lexer lex_;

  ExprPtr parse_or() {
    ExprPtr left = parse_and();
    while (lex_.current().kind == Token::Kind::Ident &&
           lex_.current().text == "or") {
      next();
      auto node = std::make_shared<Expr>();
      node->op = Expr::Op::Or;
      node->args = {left, parse_and()};
      left = node;
    }
    return left;
  }

  ExprPtr parse_and() {
    ExprPtr left = parse_not();
    while (lex_.current().kind == Token::Kind::Ident &&
           lex_.current().text == "and") {
      next();
      auto node = std::make_shared<Expr>();
      node->op = Expr::Op::And;
      node->args = {left, parse_not()};
      left = node;
    }
    return left;
  }

  ExprPtr parse_not() {
    if (lex_.current().kind == Token::Kind::Ident &&
        lex_.current().text == "not") {
      next();
      auto node = std::make_shared<Expr>();
      node->op = Expr::Op::Not;
      node->args = {parse_not()};
      return node;
    }
    return parse_comparison();
  }

  ExprPtr parse_comparison() {
    ExprPtr left = parse_additive();
    if (lex_.current().kind == Token::Kind::Op) {
      const std::string& op = lex_.current().text;
      if (op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" ||
          op == ">=") {
        auto node = std::make_shared<Expr>();
        node->op = Expr::Op::Compare;
        node->cmp = op;
        next();
        node->args = {left, parse_additive()};
        return node;
      }
    }
    return left;
  }

  ExprPtr parse_additive() {
    ExprPtr left = parse_primary();
    while (at_op("+")) {
      next();
      auto node = std::make_shared<Expr>();
      node->op = Expr::Op::Add;
      node->args = {left, parse_primary()};
      left = node;
    }
    return left;
  }

  std::string expect_string_arg() {
    if (lex_.current().kind != Token::Kind::String) {
      fail("MalformedScript", "expected a quoted string at offset " +
                                  std::to_string(lex_.current().offset));
    }
    std::string v = lex_.current().text;
    next();
    return v;
  }

  int expect_int_arg() {
    if (lex_.current().kind != Token::Kind::Number ||
        !lex_integer(lex_.current().text)) {
      fail("MalformedScript", "expected an integer at offset " +
                                  std::to_string(lex_.current().offset));
    }
    int v = std::stoi(lex_.current().text);
    next();
    return v;
  }

  ExprPtr parse_primary() {
    const Token& t = lex_.current();
    if (t.kind == Token::Kind::Number) {
      auto node = std::make_shared<Expr>();
      node->op = Expr::Op::Literal;
      node->literal = ScriptValue::decimal(t.text);
      next();
      return node;
    }
    if (t.kind == Token::Kind::String) {
      auto node = std::make_shared<Expr>();
      node->op = Expr::Op::Literal;
      node->literal = ScriptValue::string(t.text);
      next();
      return node;
    }
    if (t.kind == Token::Kind::Op && t.text == "(") {
      next();
      ExprPtr inner = parse_expression();
      expect_op(")");
      return inner;
    }
    if (t.kind == Token::Kind::Ident) {
      if (t.text == "true" || t.text == "false") {
        auto node = std::make_shared<Expr>();
        node->op = Expr::Op::Literal;
        node->literal = ScriptValue::boolean(t.text == "true");
        next();
        return node;
      }
      if (t.text == "prop" || t.text == "field" || t.text == "input") {
        std::string fn = t.text;
        next();
        expect_op("(");
        auto node = std::make_shared<Expr>();
        if (fn == "prop") {
          node->op = Expr::Op::Prop;
          node->names = {expect_string_arg()};
        } else if (fn == "field") {
          node->op = Expr::Op::Field;
          node->names.push_back(expect_string_arg());
          expect_op(",");
          node->names.push_back(expect_string_arg());
          expect_op(",");
          node->names.push_back(expect_string_arg());
        } else {
          node->op = Expr::Op::Input;
          node->names.push_back(expect_string_arg());
          expect_op(",");
          node->slot = expect_int_arg();
          expect_op(",");
          node->names.push_back(expect_string_arg());
          expect_op(",");
          node->names.push_back(expect_string_arg());
        }
        expect_op(")");
        return node;
      }
    }
    fail("MalformedScript",
         "unexpected token at offset " + std::to_string(t.offset));
  }
};

ScriptValue eval_expr(const Expr& e, const ScriptContext& ctx);

int compare_values(const ScriptValue& a, const ScriptValue& b) {
  if (a.type == ScriptValue::Type::Decimal ||
      b.type == ScriptValue::Type::Decimal) {
    auto da = Decimal::parse(a.text);
    auto db = Decimal::parse(b.text);
    if (da && db) return da->compare(*db);
  }
  int c = a.text.compare(b.text);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

ScriptValue eval_expr(const Expr& e, const ScriptContext& ctx) {
  switch (e.op) {
    case Expr::Op::Literal:
      return e.literal;
    case Expr::Op::Prop:
      if (!ctx.prop) fail("EvaluationError", "prop() not available here");
      return ctx.prop(e.names[0]);
    case Expr::Op::Field:
      if (!ctx.field) fail("EvaluationError", "field() not available here");
      return ctx.field(e.names[0], e.names[1], e.names[2]);
    case Expr::Op::Input:
      if (!ctx.input) fail("EvaluationError", "input() not available here");
      return ctx.input(e.names[0], e.slot, e.names[1], e.names[2]);
    case Expr::Op::Compare: {
      ScriptValue a = eval_expr(*e.args[0], ctx);
      ScriptValue b = eval_expr(*e.args[1], ctx);
      int c = compare_values(a, b);
      bool r = false;
      if (e.cmp == "==") r = c == 0;
      else if (e.cmp == "!=") r = c != 0;
      else if (e.cmp == "<") r = c < 0;
      else if (e.cmp == "<=") r = c <= 0;
      else if (e.cmp == ">") r = c > 0;
      else r = c >= 0;
      return ScriptValue::boolean(r);
    }
    case Expr::Op::Add: {
      ScriptValue a = eval_expr(*e.args[0], ctx);
      ScriptValue b = eval_expr(*e.args[1], ctx);
      if (a.type == ScriptValue::Type::Decimal &&
          b.type == ScriptValue::Type::Decimal) {
        auto da = Decimal::parse(a.text);
        auto db = Decimal::parse(b.text);
        if (!da || !db) fail("EvaluationError", "bad decimal operands for +");
        return ScriptValue::decimal(da->add(*db).str());
      }
      return ScriptValue::string(a.text + b.text);
    }
    case Expr::Op::And: {
      if (!eval_expr(*e.args[0], ctx).as_bool()) return ScriptValue::boolean(false);
      return ScriptValue::boolean(eval_expr(*e.args[1], ctx).as_bool());
    }
    case Expr::Op::Or: {
      if (eval_expr(*e.args[0], ctx).as_bool()) return ScriptValue::boolean(true);
      return ScriptValue::boolean(eval_expr(*e.args[1], ctx).as_bool());
    }
    case Expr::Op::Not:
      return ScriptValue::boolean(!eval_expr(*e.args[0], ctx).as_bool());
  }
  fail("EvaluationError", "bad expression node");
}

}  // namespace

Script Script::parse(std::string_view source) {
  Script script;
  script.source_ = std::string(source);
  Parser parser(source);

  while (parser.at_op(";")) parser.next();
  if (parser.at_end()) fail("MalformedScript", "empty script");

  // Assignment lists start with `Leaf/Path :=`. A plain expression may also
  // begin with an identifier (true, prop, ...), so parse the first
  // expression-or-assignment by lookahead on the token after the path.
  if (parser.at_assign_target()) {
    const std::string head = parser.current().text;
    bool keyword = head == "true" || head == "false" || head == "not" ||
                   head == "prop" || head == "field" || head == "input";
    if (!keyword) {
      // must be an assignment list
      for (;;) {
        if (parser.current().kind != Token::Kind::Ident) {
          fail("MalformedScript", "expected assignment path at offset " +
                                      std::to_string(parser.current().offset));
        }
        std::string path = parser.current().text;
        parser.next();
        parser.expect_op(":=");
        script.assignments_.emplace_back(path, parser.parse_expression());
        while (parser.at_op(";")) parser.next();
        if (parser.at_end()) break;
      }
      return script;
    }
  }

  script.expr_ = parser.parse_expression();
  while (parser.at_op(";")) parser.next();
  if (!parser.at_end()) {
    fail("MalformedScript", "trailing tokens at offset " +
                                std::to_string(parser.current().offset));
  }
  return script;
}

ScriptValue Script::evaluate(const ScriptContext& ctx) const {
  if (!expr_) fail("EvaluationError", "script is an assignment list");
  return eval_expr(*expr_, ctx);
}

bool Script::evaluate_bool(const ScriptContext& ctx) const {
  return evaluate(ctx).as_bool();
}

std::vector<std::pair<std::string, ScriptValue>> Script::run_assignments(
    const ScriptContext& ctx) const {
  if (assignments_.empty()) {
    fail("EvaluationError", "script is not an assignment list");
  }
  std::vector<std::pair<std::string, ScriptValue>> out;
  out.reserve(assignments_.size());
  for (const auto& [path, expr] : assignments_) {
    out.emplace_back(path, eval_expr(*expr, ctx));
  }
  return out;
}

int ScriptRegistry::register_script(const std::string& name,
                                    const std::string& source) {
  if (!is_identifier(name)) {
    fail("MalformedScript", "bad script name '" + name + "'");
  }
  Script script = Script::parse(source);
  auto& versions = scripts_[name];
  versions.push_back(std::move(script));
  return static_cast<int>(versions.size()) - 1;
}

bool ScriptRegistry::register_exact(const std::string& name, int version,
                                    const std::string& source) {
  auto& versions = scripts_[name];
  if (version < static_cast<int>(versions.size())) {
    if (versions[static_cast<size_t>(version)].source() != source) {
      fail("ScriptConflict", name + " v" + std::to_string(version) +
                                 " already registered with different source");
    }
    return false;
  }
  if (version != static_cast<int>(versions.size())) {
    fail("ScriptConflict", name + " v" + std::to_string(version) +
                               " would leave a version gap");
  }
  versions.push_back(Script::parse(source));
  return true;
}

const Script& ScriptRegistry::get(std::string_view name, int version) const {
  auto it = scripts_.find(name);
  if (it == scripts_.end()) {
    fail("UnknownScript", "no script named '" + std::string(name) + "'");
  }
  if (version < 0 || version >= static_cast<int>(it->second.size())) {
    fail("UnknownScript", std::string(name) + " has no version " +
                              std::to_string(version));
  }
  return it->second[static_cast<size_t>(version)];
}

bool ScriptRegistry::has(std::string_view name, int version) const {
  auto it = scripts_.find(name);
  return it != scripts_.end() && version >= 0 &&
         version < static_cast<int>(it->second.size());
}

int ScriptRegistry::version_count(std::string_view name) const {
  auto it = scripts_.find(name);
  return it == scripts_.end() ? 0 : static_cast<int>(it->second.size());
}

}  // namespace cristal
