#include "cristal/schema.hpp"

#include <algorithm>
#include <charconv>
#include <mutex>

#include "cristal/errors.hpp"

namespace cristal {

namespace {

bool spec_matches_name(const ElementSpec& spec, std::string_view name) {
  return spec.name == name || (spec.kind == ValueKind::Any && spec.name == "*");
}

std::string child_path(const std::string& parent, const std::string& name) {
  return parent + "/" + name;
}

int parse_int_or(const std::string& text, int fallback) {
  int value = fallback;
  std::from_chars(text.data(), text.data() + text.size(), value);
  return value;
}

}  // namespace

std::string_view violation_code_name(ViolationCode code) {
  switch (code) {
    case ViolationCode::MissingElement: return "MissingElement";
    case ViolationCode::UnexpectedElement: return "UnexpectedElement";
    case ViolationCode::TypeMismatch: return "TypeMismatch";
    case ViolationCode::OccursViolation: return "OccursViolation";
    case ViolationCode::EnumViolation: return "EnumViolation";
    case ViolationCode::AttributeViolation: return "AttributeViolation";
    case ViolationCode::Malformed: return "Malformed";
  }
  return "Malformed";
}

void ValidationReport::add(std::string path, ViolationCode code,
                           std::string message) {
  valid = false;
  violations.push_back({std::move(path), code, std::move(message)});
}

namespace {

void check_spec_rec(const ElementSpec& spec, const std::string& path) {
  auto bad = [&](const std::string& why) {
    fail("MalformedSchema", path + ": " + why);
  };
  if (spec.kind == ValueKind::Any) {
    if (spec.name != "*" && !is_identifier(spec.name)) bad("bad element name");
  } else if (!is_identifier(spec.name)) {
    bad("bad element name '" + spec.name + "'");
  }
  if (spec.min_occurs < 0) bad("minOccurs must be non-negative");
  if (spec.max_occurs != kUnbounded) {
    if (spec.max_occurs < 1) bad("maxOccurs must be positive or unbounded");
    if (spec.min_occurs > spec.max_occurs) bad("minOccurs exceeds maxOccurs");
  }
  if (spec.kind == ValueKind::Composite) {
    if (spec.children.empty()) bad("composite element has no children");
  } else if (!spec.children.empty()) {
    bad("scalar element has children");
  }
  if (!spec.allowed_values.empty() && spec.kind != ValueKind::String) {
    bad("allowedValues on non-string element");
  }
  for (size_t i = 0; i < spec.attributes.size(); ++i) {
    const AttributeSpec& a = spec.attributes[i];
    if (!is_identifier(a.name)) bad("bad attribute name '" + a.name + "'");
    if (!is_scalar_kind(a.kind)) bad("attribute '" + a.name + "' must be scalar");
    for (size_t j = i + 1; j < spec.attributes.size(); ++j) {
      if (spec.attributes[j].name == a.name) {
        bad("duplicate attribute '" + a.name + "'");
      }
    }
  }
  for (size_t i = 0; i < spec.children.size(); ++i) {
    for (size_t j = i + 1; j < spec.children.size(); ++j) {
      if (spec.children[i].name == spec.children[j].name) {
        bad("duplicate child '" + spec.children[i].name + "'");
      }
    }
    check_spec_rec(spec.children[i], child_path(path, spec.children[i].name));
  }
}

void validate_attributes(const XmlNode& node, const ElementSpec& spec,
                         const std::string& path, ValidationReport& report) {
  for (const AttributeSpec& a : spec.attributes) {
    const std::string* value = node.attr(a.name);
    if (!value) {
      if (a.required) {
        report.add(path, ViolationCode::AttributeViolation,
                   "missing required attribute '" + a.name + "'");
      }
      continue;
    }
    if (!lexes_as(a.kind, *value)) {
      report.add(path, ViolationCode::AttributeViolation,
                 "attribute '" + a.name + "' is not a valid " +
                     std::string(kind_name(a.kind)));
    }
  }
  for (const auto& [name, value] : node.attrs) {
    bool known = std::any_of(
        spec.attributes.begin(), spec.attributes.end(),
        [&name](const AttributeSpec& a) { return a.name == name; });
    if (!known) {
      report.add(path, ViolationCode::AttributeViolation,
                 "unknown attribute '" + name + "'");
    }
  }
}

void validate_element(const XmlNode& node, const ElementSpec& spec,
                      const std::string& path, ValidationReport& report) {
  if (spec.kind == ValueKind::Any) return;  // wildcard subtree

  validate_attributes(node, spec, path, report);

  if (spec.kind != ValueKind::Composite) {
    if (!node.children.empty()) {
      for (const XmlNode& c : node.children) {
        report.add(child_path(path, c.name), ViolationCode::UnexpectedElement,
                   "scalar element '" + spec.name + "' has child elements");
      }
      return;
    }
    if (!lexes_as(spec.kind, node.text)) {
      report.add(path, ViolationCode::TypeMismatch,
                 "value '" + node.text + "' is not a valid " +
                     std::string(kind_name(spec.kind)));
      return;
    }
    if (!spec.allowed_values.empty() &&
        std::find(spec.allowed_values.begin(), spec.allowed_values.end(),
                  node.text) == spec.allowed_values.end()) {
      report.add(path, ViolationCode::EnumViolation,
                 "value '" + node.text + "' not in the allowed set");
    }
    return;
  }

  // Composite: children must appear in spec order, grouped per spec entry.
  size_t spec_idx = 0;
  std::vector<int> counts(spec.children.size(), 0);
  for (const XmlNode& elem : node.children) {
    size_t match = spec.children.size();
    for (size_t j = spec_idx; j < spec.children.size(); ++j) {
      if (spec_matches_name(spec.children[j], elem.name)) {
        match = j;
        break;
      }
    }
    if (match == spec.children.size()) {
      bool seen_earlier =
          std::any_of(spec.children.begin(),
                      spec.children.begin() + static_cast<long>(spec_idx),
                      [&elem](const ElementSpec& s) {
                        return spec_matches_name(s, elem.name);
                      });
      report.add(child_path(path, elem.name), ViolationCode::UnexpectedElement,
                 seen_earlier ? "element out of order" : "element not in schema");
      continue;
    }
    spec_idx = match;
    counts[match] += 1;
    validate_element(elem, spec.children[match],
                     child_path(path, elem.name), report);
  }
  for (size_t j = 0; j < spec.children.size(); ++j) {
    const ElementSpec& cs = spec.children[j];
    std::string cpath = child_path(path, cs.name);
    if (counts[j] < cs.min_occurs) {
      if (counts[j] == 0) {
        report.add(cpath, ViolationCode::MissingElement,
                   "required element missing");
      } else {
        report.add(cpath, ViolationCode::OccursViolation,
                   "element occurs " + std::to_string(counts[j]) +
                       " times, minimum is " + std::to_string(cs.min_occurs));
      }
    } else if (cs.max_occurs != kUnbounded && counts[j] > cs.max_occurs) {
      report.add(cpath, ViolationCode::OccursViolation,
                 "element occurs " + std::to_string(counts[j]) +
                     " times, maximum is " + std::to_string(cs.max_occurs));
    }
  }
}

}  // namespace

void check_element_spec(const ElementSpec& spec) {
  check_spec_rec(spec, spec.name);
}

ValidationReport validate_document(const XmlNode& doc, const ElementSpec& root) {
  ValidationReport report;
  if (!spec_matches_name(root, doc.name)) {
    report.add(doc.name, ViolationCode::UnexpectedElement,
               "root element must be '" + root.name + "'");
    return report;
  }
  validate_element(doc, root, doc.name, report);
  return report;
}

namespace {

XmlNode element_spec_to_xml(const ElementSpec& spec) {
  XmlNode node;
  node.name = "Element";
  node.set_attr("name", spec.name);
  node.set_attr("kind", kind_name(spec.kind));
  node.set_attr("minOccurs", std::to_string(spec.min_occurs));
  node.set_attr("maxOccurs", spec.max_occurs == kUnbounded
                                 ? "unbounded"
                                 : std::to_string(spec.max_occurs));
  for (const AttributeSpec& a : spec.attributes) {
    XmlNode an;
    an.name = "Attribute";
    an.set_attr("name", a.name);
    an.set_attr("kind", kind_name(a.kind));
    an.set_attr("required", a.required ? "true" : "false");
    node.children.push_back(std::move(an));
  }
  for (const std::string& v : spec.allowed_values) {
    XmlNode vn;
    vn.name = "Value";
    vn.text = v;
    node.children.push_back(std::move(vn));
  }
  for (const ElementSpec& c : spec.children) {
    node.children.push_back(element_spec_to_xml(c));
  }
  return node;
}

ElementSpec element_spec_from_xml(const XmlNode& node) {
  auto bad = [&](const std::string& why) {
    fail("MalformedSchema", "<" + node.name + ">: " + why);
  };
  if (node.name != "Element") bad("expected <Element>");
  ElementSpec spec;
  spec.name = node.attr_or("name", "");
  auto kind = kind_from_name(node.attr_or("kind", ""));
  if (!kind) bad("missing or unknown kind");
  spec.kind = *kind;
  const std::string min = node.attr_or("minOccurs", "1");
  const std::string max = node.attr_or("maxOccurs", "1");
  if (!lex_integer(min)) bad("bad minOccurs");
  spec.min_occurs = parse_int_or(min, 1);
  if (max == "unbounded") {
    spec.max_occurs = kUnbounded;
  } else {
    if (!lex_integer(max)) bad("bad maxOccurs");
    spec.max_occurs = parse_int_or(max, 1);
  }
  for (const auto& [k, v] : node.attrs) {
    if (k != "name" && k != "kind" && k != "minOccurs" && k != "maxOccurs") {
      bad("unknown attribute '" + k + "'");
    }
    (void)v;
  }
  // Canonical child order: Attribute*, Value*, Element*.
  int phase = 0;
  for (const XmlNode& c : node.children) {
    if (c.name == "Attribute") {
      if (phase > 0) bad("<Attribute> after <Value> or <Element>");
      AttributeSpec a;
      a.name = c.attr_or("name", "");
      auto akind = kind_from_name(c.attr_or("kind", "string"));
      if (!akind) bad("attribute '" + a.name + "' has unknown kind");
      a.kind = *akind;
      a.required = c.attr_or("required", "false") == "true";
      spec.attributes.push_back(std::move(a));
    } else if (c.name == "Value") {
      if (phase > 1) bad("<Value> after <Element>");
      phase = 1;
      spec.allowed_values.push_back(c.text);
    } else if (c.name == "Element") {
      phase = 2;
      spec.children.push_back(element_spec_from_xml(c));
    } else {
      bad("unexpected child <" + c.name + ">");
    }
  }
  return spec;
}

}  // namespace

XmlNode schema_to_xml(const SchemaDef& def) {
  XmlNode node;
  node.name = "Schema";
  node.set_attr("name", def.name);
  node.set_attr("version", std::to_string(def.version));
  node.children.push_back(element_spec_to_xml(def.root));
  return node;
}

SchemaDef schema_from_xml(const XmlNode& doc) {
  if (doc.name != "Schema") {
    fail("MalformedSchema", "expected <Schema>, got <" + doc.name + ">");
  }
  SchemaDef def;
  def.name = doc.attr_or("name", "");
  if (!is_identifier(def.name)) {
    fail("MalformedSchema", "bad schema name '" + def.name + "'");
  }
  const std::string version = doc.attr_or("version", "0");
  if (!lex_integer(version)) fail("MalformedSchema", "bad version");
  def.version = parse_int_or(version, 0);
  if (doc.children.size() != 1) {
    fail("MalformedSchema", "<Schema> must contain exactly one <Element>");
  }
  def.root = element_spec_from_xml(doc.children.front());
  check_element_spec(def.root);
  return def;
}

std::pair<std::string, int> SchemaRegistry::register_schema(
    const std::string& name, ElementSpec root) {
  if (!is_identifier(name)) {
    fail("MalformedSchema", "bad schema name '" + name + "'");
  }
  check_element_spec(root);
  std::unique_lock lock(*mutex_);
  auto& versions = schemas_[name];
  int version = static_cast<int>(versions.size());
  versions.push_back(SchemaDef{name, version, std::move(root)});
  return {name, version};
}

bool SchemaRegistry::register_exact(const SchemaDef& def) {
  check_element_spec(def.root);
  std::unique_lock lock(*mutex_);
  auto& versions = schemas_[def.name];
  if (def.version < static_cast<int>(versions.size())) {
    const SchemaDef& existing = versions[static_cast<size_t>(def.version)];
    if (to_canonical_xml(schema_to_xml(existing)) !=
        to_canonical_xml(schema_to_xml(def))) {
      fail("SchemaConflict", def.name + " v" + std::to_string(def.version) +
                                 " already registered with different content");
    }
    return false;
  }
  if (def.version != static_cast<int>(versions.size())) {
    fail("SchemaConflict", def.name + " v" + std::to_string(def.version) +
                               " would leave a version gap");
  }
  versions.push_back(def);
  return true;
}

const SchemaDef& SchemaRegistry::get_locked(std::string_view name,
                                            std::string_view selector) const {
  auto it = schemas_.find(name);
  if (it == schemas_.end() || it->second.empty()) {
    fail("UnknownSchema", "no schema named '" + std::string(name) + "'");
  }
  if (selector == "last") return it->second.back();
  if (!lex_integer(selector) || selector.empty() || selector.front() == '-') {
    fail("UnknownVersion", "bad version selector '" + std::string(selector) +
                               "' for schema '" + std::string(name) + "'");
  }
  size_t version = 0;
  std::from_chars(selector.data(), selector.data() + selector.size(), version);
  if (version >= it->second.size()) {
    fail("UnknownVersion", std::string(name) + " has no version " +
                               std::string(selector));
  }
  return it->second[version];
}

const SchemaDef& SchemaRegistry::get(std::string_view name,
                                     std::string_view selector) const {
  std::shared_lock lock(*mutex_);
  return get_locked(name, selector);
}

const SchemaDef& SchemaRegistry::get(std::string_view name, int version) const {
  return get(name, std::to_string(version));
}

bool SchemaRegistry::has(std::string_view name) const {
  std::shared_lock lock(*mutex_);
  return schemas_.find(name) != schemas_.end();
}

bool SchemaRegistry::has(std::string_view name, int version) const {
  std::shared_lock lock(*mutex_);
  auto it = schemas_.find(name);
  return it != schemas_.end() && version >= 0 &&
         version < static_cast<int>(it->second.size());
}

int SchemaRegistry::version_count(std::string_view name) const {
  std::shared_lock lock(*mutex_);
  auto it = schemas_.find(name);
  return it == schemas_.end() ? 0 : static_cast<int>(it->second.size());
}

std::vector<std::string> SchemaRegistry::names() const {
  std::shared_lock lock(*mutex_);
  std::vector<std::string> out;
  out.reserve(schemas_.size());
  for (const auto& [name, versions] : schemas_) out.push_back(name);
  return out;
}

ValidationReport SchemaRegistry::validate(const XmlNode& doc,
                                          std::string_view name,
                                          std::string_view selector) const {
  std::shared_lock lock(*mutex_);
  const SchemaDef& def = get_locked(name, selector);
  return validate_document(doc, def.root);
}

ValidationReport SchemaRegistry::validate_text(std::string_view text,
                                               std::string_view name,
                                               std::string_view selector) const {
  {
    std::shared_lock lock(*mutex_);
    get_locked(name, selector);  // UnknownSchema/UnknownVersion first
  }
  XmlParseError err;
  auto doc = try_parse_xml(text, &err);
  if (!doc) {
    ValidationReport report;
    report.add("", ViolationCode::Malformed,
               err.message + " at offset " + std::to_string(err.offset));
    return report;
  }
  return validate(*doc, name, selector);
}

}  // namespace cristal
