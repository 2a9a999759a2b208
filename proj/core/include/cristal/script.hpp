#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cristal {

// Runtime value of a script expression. Decimal text is kept normalized.
struct ScriptValue {
  enum class Type { String, Decimal, Boolean };
  Type type = Type::String;
  std::string text;

  static ScriptValue string(std::string v);
  static ScriptValue decimal(std::string v);  // must lex as a decimal
  static ScriptValue boolean(bool v);
  bool as_bool() const;  // EvaluationError unless Boolean
};

// Bridges script evaluation to item state. All readers return nullopt when
// the referenced container exists but the leaf does not (read as empty);
// they throw EvaluationError when the container itself cannot be resolved.
struct ScriptContext {
  std::function<ScriptValue(const std::string& name)> prop;
  std::function<ScriptValue(const std::string& schema, const std::string& view,
                            const std::string& path)>
      field;
  std::function<ScriptValue(const std::string& collection, int slot,
                            const std::string& schema, const std::string& path)>
      input;
};

// The pure expression language used for predicates and automatic outcomes:
//   literals ("s", 12.5, true), prop("Name"),
//   field("Schema","view","Root/Leaf"), input("coll", 0, "Schema", "Root/Leaf"),
//   comparisons (== != < <= > >=), + (decimal add / string concat),
//   and / or / not, parentheses.
// An automatic-activity script is a list of `Root/Leaf := expr` assignments
// separated by ';' or newlines.
class Script {
public:
  // Throws Error("MalformedScript") with the offset on bad syntax.
  static Script parse(std::string_view source);

  bool is_assignment_list() const { return !assignments_.empty(); }
  const std::string& source() const { return source_; }

  ScriptValue evaluate(const ScriptContext& ctx) const;
  bool evaluate_bool(const ScriptContext& ctx) const;
  // Evaluates each assignment in order; returns (leaf path, value) pairs.
  std::vector<std::pair<std::string, ScriptValue>> run_assignments(
      const ScriptContext& ctx) const;

  struct Expr;

private:
  std::string source_;
  std::shared_ptr<const Expr> expr_;  // single-expression form
  std::vector<std::pair<std::string, std::shared_ptr<const Expr>>> assignments_;
};

// Versioned source registry, dense from 0 per name like the schema registry.
class ScriptRegistry {
public:
  int register_script(const std::string& name, const std::string& source);
  // Import/replay path; re-adding an identical (name, version) is a no-op.
  bool register_exact(const std::string& name, int version,
                      const std::string& source);
  const Script& get(std::string_view name, int version) const;
  bool has(std::string_view name, int version) const;
  int version_count(std::string_view name) const;

private:
  std::map<std::string, std::vector<Script>, std::less<>> scripts_;
};

}  // namespace cristal
