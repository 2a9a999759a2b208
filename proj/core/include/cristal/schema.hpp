#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "cristal/values.hpp"
#include "cristal/xml.hpp"

namespace cristal {

inline constexpr int kUnbounded = -1;

struct AttributeSpec {
  std::string name;
  ValueKind kind = ValueKind::String;  // scalar kinds only
  bool required = false;
};

// One element in a schema tree. Scalar kinds constrain leaf text; Composite
// holds an ordered child list that documents must match in order; Any accepts
// an arbitrary well-formed subtree (used by the built-in description schemas,
// whose content grammars are recursive). An Any spec named "*" matches any
// element name.
struct ElementSpec {
  std::string name;
  ValueKind kind = ValueKind::String;
  int min_occurs = 1;
  int max_occurs = 1;  // kUnbounded for no upper bound
  std::vector<AttributeSpec> attributes;
  std::vector<std::string> allowed_values;  // string kind only
  std::vector<ElementSpec> children;        // composite only
};

struct SchemaDef {
  std::string name;
  int version = 0;
  ElementSpec root;
};

enum class ViolationCode {
  MissingElement,
  UnexpectedElement,
  TypeMismatch,
  OccursViolation,
  EnumViolation,
  AttributeViolation,
  Malformed,
};

std::string_view violation_code_name(ViolationCode code);

struct Violation {
  std::string path;  // slash-separated element path from the root
  ViolationCode code;
  std::string message;
};

struct ValidationReport {
  bool valid = true;
  std::vector<Violation> violations;

  void add(std::string path, ViolationCode code, std::string message);
};

// Throws Error("MalformedSchema") with the offending path if the spec breaks
// an invariant: occurrence bounds, scalar/composite child rules, duplicate
// child names, enum on non-string, non-identifier names.
void check_element_spec(const ElementSpec& spec);

// Validates a parsed document against a root spec. Reports every violation;
// never stops at the first.
ValidationReport validate_document(const XmlNode& doc, const ElementSpec& root);

// Schema document form, canonical:
// <Schema name="N" version="V"><Element name=".." kind=".." minOccurs=".."
// maxOccurs=".."><Attribute name=".." kind=".." required=".."/>
// <Value>..</Value><Element../></Element></Schema>
XmlNode schema_to_xml(const SchemaDef& def);
SchemaDef schema_from_xml(const XmlNode& doc);  // throws MalformedSchema

// Append-only versioned registry. Re-registering a name yields version+1;
// definitions are immutable once stored. Reads are shared, registrations are
// serialized by an internal writer lock.
class SchemaRegistry {
public:
  // Returns (name, assigned version).
  std::pair<std::string, int> register_schema(const std::string& name,
                                              ElementSpec root);
  // Import path: version must be exactly the next version for the name,
  // except that re-importing an identical existing definition is a no-op.
  // Returns true if the definition was added.
  bool register_exact(const SchemaDef& def);

  const SchemaDef& get(std::string_view name, std::string_view selector) const;
  const SchemaDef& get(std::string_view name, int version) const;
  bool has(std::string_view name) const;
  bool has(std::string_view name, int version) const;
  int version_count(std::string_view name) const;
  std::vector<std::string> names() const;  // sorted

  ValidationReport validate(const XmlNode& doc, std::string_view name,
                            std::string_view selector) const;
  // Convenience for raw text; a parse failure yields a single Malformed
  // violation instead of an exception.
  ValidationReport validate_text(std::string_view text, std::string_view name,
                                 std::string_view selector) const;

private:
  mutable std::unique_ptr<std::shared_mutex> mutex_ =
      std::make_unique<std::shared_mutex>();
  std::map<std::string, std::vector<SchemaDef>, std::less<>> schemas_;

  const SchemaDef& get_locked(std::string_view name,
                              std::string_view selector) const;
};

}  // namespace cristal
