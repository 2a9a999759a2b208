#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cristal/schema.hpp"
#include "cristal/values.hpp"
#include "cristal/xml.hpp"

namespace cristal {

struct TypedValue {
  ValueKind kind = ValueKind::String;
  std::string text;
  bool operator==(const TypedValue&) const = default;
};

// One entry per leaf element occurrence of every indexed outcome.
struct IndexEntry {
  std::string item;  // uuid
  int event_id = 0;
  std::string schema_name;
  int schema_version = 0;
  std::string item_type;  // the owning item's Type property at index time
  std::string path;       // slash-separated from the document root
  TypedValue value;
};

enum class QueryOp { Eq, Ne, Lt, Le, Gt, Ge, Contains };

std::string_view query_op_text(QueryOp op);

struct QueryClause {
  std::string path;
  QueryOp op = QueryOp::Eq;
  TypedValue literal;
  bool operator==(const QueryClause&) const = default;
};

// Conjunction of predicates with optional schema and item-type filters.
// Matching is per outcome with existential semantics over repeated paths.
struct Query {
  std::optional<std::string> schema_filter;
  std::optional<std::string> type_filter;
  std::vector<QueryClause> clauses;
  bool operator==(const Query&) const = default;
};

// Grammar (ASCII):
//   query  := clause (" and " clause)*
//   clause := "schema=" NAME | "type=" NAME | PATH OP LITERAL
//   OP     := "=" | "!=" | "<" | "<=" | ">" | ">=" | " contains "
// Literals: double-quoted strings, bare decimals, true|false, ISO timestamps.
Query parse_query(std::string_view text);  // Error("SyntaxError") with offset
std::string print_query(const Query& query);

struct QueryHit {
  std::string item;
  int event_id = 0;
  std::string schema_name;
  bool operator==(const QueryHit&) const = default;
  auto operator<=>(const QueryHit&) const = default;
};

// Derived metadata index over stored outcomes. Never journaled; the store
// rebuilds it by replay on load.
class Atlas {
public:
  // Adds one entry per leaf occurrence; idempotent per (item, event).
  // Returns the number of entries added.
  int index_outcome(const std::string& item, int event_id,
                    const SchemaDef& schema, const XmlNode& document,
                    const std::string& item_type);

  // Throws UnknownPath / TypeMismatch for ill-typed queries.
  std::vector<QueryHit> query(const Query& query,
                              const SchemaRegistry& registry) const;

  const std::vector<IndexEntry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

private:
  std::vector<IndexEntry> entries_;
  std::set<std::pair<std::string, int>> indexed_;
};

}  // namespace cristal
