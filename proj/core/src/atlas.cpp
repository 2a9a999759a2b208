#include "cristal/atlas.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "cristal/errors.hpp"

namespace cristal {

namespace {

void walk_leaves(const XmlNode& node, const ElementSpec* spec,
                 const std::string& path,
                 std::vector<std::pair<std::string, TypedValue>>& out) {
  if (spec && spec->kind == ValueKind::Composite) {
    for (const XmlNode& child : node.children) {
      const ElementSpec* child_spec = nullptr;
      for (const ElementSpec& cs : spec->children) {
        if (cs.name == child.name || (cs.kind == ValueKind::Any && cs.name == "*")) {
          child_spec = &cs;
          break;
        }
      }
      walk_leaves(child, child_spec, path + "/" + child.name, out);
    }
    return;
  }
  if (spec && is_scalar_kind(spec->kind)) {
    out.emplace_back(path, TypedValue{spec->kind, node.text});
    return;
  }
  // Any-typed or unknown subtree: index leaves as strings.
  if (node.children.empty()) {
    out.emplace_back(path, TypedValue{ValueKind::String, node.text});
    return;
  }
  for (const XmlNode& child : node.children) {
    walk_leaves(child, nullptr, path + "/" + child.name, out);
  }
}

// All leaf kinds reachable at `path` across the given schema versions.
void collect_path_kinds(const ElementSpec& spec, const std::string& prefix,
                        std::string_view path, std::vector<ValueKind>& kinds) {
  std::string here = prefix.empty() ? spec.name : prefix + "/" + spec.name;
  if (spec.kind == ValueKind::Any) {
    // Wildcard subtrees admit any path below them as a string leaf.
    std::string_view p(path);
    if (spec.name == "*" || p == here || p.starts_with(here + "/")) {
      kinds.push_back(ValueKind::String);
    }
    return;
  }
  if (is_scalar_kind(spec.kind)) {
    if (here == path) kinds.push_back(spec.kind);
    return;
  }
  if (!path.starts_with(here + "/")) return;
  for (const ElementSpec& child : spec.children) {
    collect_path_kinds(child, here, path, kinds);
  }
}

bool is_ordering(QueryOp op) {
  return op == QueryOp::Lt || op == QueryOp::Le || op == QueryOp::Gt ||
         op == QueryOp::Ge;
}

bool literal_compatible(ValueKind path_kind, ValueKind literal_kind) {
  switch (path_kind) {
    case ValueKind::String: return literal_kind == ValueKind::String;
    case ValueKind::Integer:
    case ValueKind::Decimal: return literal_kind == ValueKind::Decimal;
    case ValueKind::Boolean: return literal_kind == ValueKind::Boolean;
    case ValueKind::Timestamp: return literal_kind == ValueKind::Timestamp;
    default: return literal_kind == ValueKind::String;
  }
}

bool clause_matches(const IndexEntry& entry, const QueryClause& clause) {
  if (entry.path != clause.path) return false;
  if (clause.op == QueryOp::Contains) {
    return entry.value.text.find(clause.literal.text) != std::string::npos;
  }
  int c = compare_typed(entry.value.kind, entry.value.text, clause.literal.text);
  switch (clause.op) {
    case QueryOp::Eq: return c == 0;
    case QueryOp::Ne: return c != 0;
    case QueryOp::Lt: return c < 0;
    case QueryOp::Le: return c <= 0;
    case QueryOp::Gt: return c > 0;
    case QueryOp::Ge: return c >= 0;
    case QueryOp::Contains: return false;
  }
  return false;
}

}  // namespace

std::string_view query_op_text(QueryOp op) {
  switch (op) {
    case QueryOp::Eq: return "=";
    case QueryOp::Ne: return "!=";
    case QueryOp::Lt: return "<";
    case QueryOp::Le: return "<=";
    case QueryOp::Gt: return ">";
    case QueryOp::Ge: return ">=";
    case QueryOp::Contains: return "contains";
  }
  return "=";
}

int Atlas::index_outcome(const std::string& item, int event_id,
                         const SchemaDef& schema, const XmlNode& document,
                         const std::string& item_type) {
  if (!indexed_.insert({item, event_id}).second) return 0;
  std::vector<std::pair<std::string, TypedValue>> leaves;
  const ElementSpec* root =
      (schema.root.name == document.name ||
       (schema.root.kind == ValueKind::Any && schema.root.name == "*"))
          ? &schema.root
          : nullptr;
  walk_leaves(document, root, document.name, leaves);
  for (auto& [path, value] : leaves) {
    entries_.push_back(IndexEntry{item, event_id, schema.name, schema.version,
                                  item_type, std::move(path), std::move(value)});
  }
  return static_cast<int>(leaves.size());
}

std::vector<QueryHit> Atlas::query(const Query& query,
                                   const SchemaRegistry& registry) const {
  // Type-check each clause against the registered schemas in scope.
  for (const QueryClause& clause : query.clauses) {
    std::vector<ValueKind> kinds;
    std::vector<std::string> names =
        query.schema_filter ? std::vector<std::string>{*query.schema_filter}
                            : registry.names();
    for (const std::string& name : names) {
      int count = registry.version_count(name);
      for (int v = 0; v < count; ++v) {
        collect_path_kinds(registry.get(name, v).root, "", clause.path, kinds);
      }
    }
    if (kinds.empty()) {
      fail("UnknownPath", "no registered schema has a leaf at '" +
                              clause.path + "'");
    }
    for (ValueKind kind : kinds) {
      if (is_ordering(clause.op) && kind != ValueKind::Integer &&
          kind != ValueKind::Decimal && kind != ValueKind::Timestamp) {
        fail("TypeMismatch", "ordering comparison on " +
                                 std::string(kind_name(kind)) + " path '" +
                                 clause.path + "'");
      }
      if (clause.op == QueryOp::Contains && kind != ValueKind::String) {
        fail("TypeMismatch",
             "contains on " + std::string(kind_name(kind)) + " path '" +
                 clause.path + "'");
      }
      if (!literal_compatible(kind, clause.literal.kind)) {
        fail("TypeMismatch", "literal '" + clause.literal.text +
                                 "' does not match " +
                                 std::string(kind_name(kind)) + " path '" +
                                 clause.path + "'");
      }
    }
  }

  // Group entries per outcome, then test each group conjunctively.
  std::map<std::pair<std::string, int>, std::vector<const IndexEntry*>> groups;
  for (const IndexEntry& e : entries_) {
    groups[{e.item, e.event_id}].push_back(&e);
  }
  std::vector<QueryHit> hits;
  for (const auto& [key, group] : groups) {
    const IndexEntry& head = *group.front();
    if (query.schema_filter && head.schema_name != *query.schema_filter) continue;
    if (query.type_filter && head.item_type != *query.type_filter) continue;
    bool all = true;
    for (const QueryClause& clause : query.clauses) {
      bool any = std::any_of(group.begin(), group.end(),
                             [&clause](const IndexEntry* e) {
                               return clause_matches(*e, clause);
                             });
      if (!any) {
        all = false;
        break;
      }
    }
    if (all) hits.push_back({head.item, head.event_id, head.schema_name});
  }
  std::sort(hits.begin(), hits.end());
  return hits;
}

namespace {

class QueryParser {
public:
  explicit QueryParser(std::string_view text) : text_(text) {}

  Query parse() {
    Query query;
    skip_ws();
    if (pos_ >= text_.size()) err("empty query");
    parse_clause(query);
    for (;;) {
      size_t save = pos_;
      skip_ws();
      if (pos_ >= text_.size()) break;
      if (!word("and")) {
        pos_ = save;
        err("expected 'and'");
      }
      skip_ws();
      parse_clause(query);
    }
    return query;
  }

private:
  std::string_view text_;
  size_t pos_ = 0;

  [[noreturn]] void err(const std::string& why) {
    fail("SyntaxError", why + " at offset " + std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  bool word(std::string_view w) {
    if (text_.substr(pos_, w.size()) == w) {
      size_t after = pos_ + w.size();
      if (after == text_.size() || text_[after] == ' ') {
        pos_ = after;
        return true;
      }
    }
    return false;
  }

  std::string parse_name() {
    size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
            text_[pos_] == '_' || text_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == start) err("expected a name");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::string parse_path() {
    std::string path = parse_name();
    while (pos_ < text_.size() && text_[pos_] == '/') {
      ++pos_;
      path += '/';
      path += parse_name();
    }
    return path;
  }

  void parse_clause(Query& query) {
    if (text_.substr(pos_).starts_with("schema=")) {
      pos_ += 7;
      query.schema_filter = parse_name();
      return;
    }
    if (text_.substr(pos_).starts_with("type=")) {
      pos_ += 5;
      query.type_filter = parse_name();
      return;
    }
    QueryClause clause;
    clause.path = parse_path();
    skip_ws();
    if (word("contains")) {
      clause.op = QueryOp::Contains;
    } else if (text_.substr(pos_, 2) == "!=") {
      clause.op = QueryOp::Ne;
      pos_ += 2;
    } else if (text_.substr(pos_, 2) == "<=") {
      clause.op = QueryOp::Le;
      pos_ += 2;
    } else if (text_.substr(pos_, 2) == ">=") {
      clause.op = QueryOp::Ge;
      pos_ += 2;
    } else if (pos_ < text_.size() && text_[pos_] == '<') {
      clause.op = QueryOp::Lt;
      ++pos_;
    } else if (pos_ < text_.size() && text_[pos_] == '>') {
      clause.op = QueryOp::Gt;
      ++pos_;
    } else if (pos_ < text_.size() && text_[pos_] == '=') {
      clause.op = QueryOp::Eq;
      ++pos_;
    } else {
      err("expected an operator");
    }
    skip_ws();
    clause.literal = parse_literal();
    query.clauses.push_back(std::move(clause));
  }

  TypedValue parse_literal() {
    if (pos_ >= text_.size()) err("expected a literal");
    if (text_[pos_] == '"') {
      size_t end = text_.find('"', pos_ + 1);
      if (end == std::string_view::npos) err("unterminated string literal");
      TypedValue v{ValueKind::String,
                   std::string(text_.substr(pos_ + 1, end - pos_ - 1))};
      pos_ = end + 1;
      return v;
    }
    size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ') ++pos_;
    std::string tok(text_.substr(start, pos_ - start));
    if (tok == "true" || tok == "false") return {ValueKind::Boolean, tok};
    if (lex_timestamp(tok)) return {ValueKind::Timestamp, tok};
    if (auto d = Decimal::parse(tok)) return {ValueKind::Decimal, d->str()};
    pos_ = start;
    err("bad literal '" + tok + "'");
  }
};

}  // namespace

Query parse_query(std::string_view text) { return QueryParser(text).parse(); }

std::string print_query(const Query& query) {
  std::vector<std::string> parts;
  if (query.schema_filter) parts.push_back("schema=" + *query.schema_filter);
  if (query.type_filter) parts.push_back("type=" + *query.type_filter);
  for (const QueryClause& clause : query.clauses) {
    std::string s = clause.path;
    s += ' ';
    s += query_op_text(clause.op);
    s += ' ';
    if (clause.literal.kind == ValueKind::String) {
      s += '"' + clause.literal.text + '"';
    } else {
      s += clause.literal.text;
    }
    parts.push_back(std::move(s));
  }
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += " and ";
    out += parts[i];
  }
  return out;
}

}  // namespace cristal
