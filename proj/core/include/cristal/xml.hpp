#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cristal {

// Minimal XML document model: an element tree where every element carries
// either child elements or text, never both. Attribute order is significant
// and preserved; it is part of the canonical form.
struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attrs;
  std::vector<XmlNode> children;
  std::string text;

  const std::string* attr(std::string_view attr_name) const;
  std::string attr_or(std::string_view attr_name, std::string_view fallback) const;
  void set_attr(std::string_view attr_name, std::string_view value);
  const XmlNode* child(std::string_view child_name) const;
  std::vector<const XmlNode*> children_named(std::string_view child_name) const;

  bool operator==(const XmlNode&) const = default;
};

struct XmlParseError {
  size_t offset = 0;
  std::string message;
};

// Strict parser for the subset: no DTDs, no processing instructions, no
// namespaces, no mixed content, entities limited to amp/lt/gt/quot/apos plus
// numeric character references. Comments and a leading XML declaration are
// accepted and dropped. Whitespace-only text around child elements is
// ignored; text in a leaf element is preserved exactly.
std::optional<XmlNode> try_parse_xml(std::string_view input, XmlParseError* error);

// Same, but throws Error("MalformedXml") with the offset in the detail.
XmlNode parse_xml(std::string_view input);

// Canonical single-line form: used for journal records and golden comparisons.
std::string to_canonical_xml(const XmlNode& node);

// Pretty form: two-space indent, LF line endings, trailing newline.
std::string to_pretty_xml(const XmlNode& node);

// Escapes & < > " ' as the five standard entities.
std::string xml_escape(std::string_view raw);

}  // namespace cristal
