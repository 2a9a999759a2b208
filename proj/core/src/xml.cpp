#include "cristal/xml.hpp"

#include <cctype>

#include "cristal/errors.hpp"

namespace cristal {

const std::string* XmlNode::attr(std::string_view attr_name) const {
  for (const auto& [k, v] : attrs) {
    if (k == attr_name) return &v;
  }
  return nullptr;
}

std::string XmlNode::attr_or(std::string_view attr_name,
                             std::string_view fallback) const {
  const std::string* v = attr(attr_name);
  return v ? *v : std::string(fallback);
}

void XmlNode::set_attr(std::string_view attr_name, std::string_view value) {
  for (auto& [k, v] : attrs) {
    if (k == attr_name) {
      v = std::string(value);
      return;
    }
  }
  attrs.emplace_back(std::string(attr_name), std::string(value));
}

const XmlNode* XmlNode::child(std::string_view child_name) const {
  for (const auto& c : children) {
    if (c.name == child_name) return &c;
  }
  return nullptr;
}

std::vector<const XmlNode*> XmlNode::children_named(
    std::string_view child_name) const {
  std::vector<const XmlNode*> out;
  for (const auto& c : children) {
    if (c.name == child_name) out.push_back(&c);
  }
  return out;
}

namespace {

class Parser {
public:
  explicit Parser(std::string_view input) : in_(input) {}

  XmlNode parse_document() {
    skip_prolog();
    XmlNode root = parse_element();
    skip_misc();
    if (pos_ != in_.size()) err("trailing content after root element");
    return root;
  }

  XmlParseError error() const { return {err_offset_, err_message_}; }
  bool failed() const { return failed_; }

private:
  std::string_view in_;
  size_t pos_ = 0;
  bool failed_ = false;
  size_t err_offset_ = 0;
  std::string err_message_;

  struct Bail {};

  [[noreturn]] void err(std::string message) {
    failed_ = true;
    err_offset_ = pos_;
    err_message_ = std::move(message);
    throw Bail{};
  }

  bool eof() const { return pos_ >= in_.size(); }
  char peek() const { return in_[pos_]; }
  bool starts_with(std::string_view s) const {
    return in_.substr(pos_, s.size()) == s;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r' ||
                      peek() == '\n')) {
      ++pos_;
    }
  }

  void skip_comment() {
    // at "<!--"
    pos_ += 4;
    size_t end = in_.find("-->", pos_);
    if (end == std::string_view::npos) err("unterminated comment");
    pos_ = end + 3;
  }

  void skip_prolog() {
    skip_ws();
    if (starts_with("<?xml")) {
      size_t end = in_.find("?>", pos_);
      if (end == std::string_view::npos) err("unterminated XML declaration");
      pos_ = end + 2;
    }
    skip_misc();
  }

  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<!--")) {
        skip_comment();
      } else {
        return;
      }
    }
  }

  static bool name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  }
  static bool name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
           c == '-' || c == '.' || c == '*';
  }

  std::string parse_name() {
    if (eof() || !(name_start(peek()) || peek() == '*')) err("expected a name");
    size_t start = pos_;
    while (!eof() && name_char(peek())) ++pos_;
    return std::string(in_.substr(start, pos_ - start));
  }

  void expect(char c) {
    if (eof() || peek() != c) err(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string decode_entity() {
    // at '&'
    size_t semi = in_.find(';', pos_);
    if (semi == std::string_view::npos || semi - pos_ > 12) {
      err("unterminated entity reference");
    }
    std::string_view body = in_.substr(pos_ + 1, semi - pos_ - 1);
    pos_ = semi + 1;
    if (body == "amp") return "&";
    if (body == "lt") return "<";
    if (body == "gt") return ">";
    if (body == "quot") return "\"";
    if (body == "apos") return "'";
    if (!body.empty() && body[0] == '#') {
      // Numeric character reference, decoded to UTF-8.
      unsigned long code = 0;
      bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
      std::string_view digits = body.substr(hex ? 2 : 1);
      if (digits.empty()) err("bad character reference");
      for (char c : digits) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (hex && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (hex && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else { err("bad character reference"); }
        code = code * (hex ? 16 : 10) + static_cast<unsigned long>(d);
        if (code > 0x10FFFF) err("character reference out of range");
      }
      std::string out;
      if (code < 0x80) {
        out += static_cast<char>(code);
      } else if (code < 0x800) {
        out += static_cast<char>(0xC0 | (code >> 6));
        out += static_cast<char>(0x80 | (code & 0x3F));
      } else if (code < 0x10000) {
        out += static_cast<char>(0xE0 | (code >> 12));
        out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (code & 0x3F));
      } else {
        out += static_cast<char>(0xF0 | (code >> 18));
        out += static_cast<char>(0x80 | ((code >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (code & 0x3F));
      }
      return out;
    }
    err("unknown entity '&" + std::string(body) + ";'");
  }

  std::string parse_attr_value() {
    if (eof() || (peek() != '"' && peek() != '\'')) {
      err("expected quoted attribute value");
    }
    char quote = peek();
    ++pos_;
    std::string value;
    while (!eof() && peek() != quote) {
      char c = peek();
      if (c == '<') err("'<' in attribute value");
      if (c == '&') {
        value += decode_entity();
      } else {
        value += c;
        ++pos_;
      }
    }
    expect(quote);
    return value;
  }

  XmlNode parse_element() {
    expect('<');
    XmlNode node;
    node.name = parse_name();
    for (;;) {
      bool had_ws = !eof() && std::isspace(static_cast<unsigned char>(peek()));
      skip_ws();
      if (eof()) err("unterminated start tag");
      if (peek() == '>') {
        ++pos_;
        parse_content(node);
        return node;
      }
      if (starts_with("/>")) {
        pos_ += 2;
        return node;
      }
      if (!had_ws) err("expected whitespace before attribute");
      std::string attr_name = parse_name();
      if (node.attr(attr_name)) err("duplicate attribute '" + attr_name + "'");
      skip_ws();
      expect('=');
      skip_ws();
      node.attrs.emplace_back(std::move(attr_name), parse_attr_value());
    }
  }

  void parse_content(XmlNode& node) {
    std::string text;
    bool text_significant = false;
    for (;;) {
      if (eof()) err("unterminated element '" + node.name + "'");
      char c = peek();
      if (c == '<') {
        if (starts_with("</")) {
          pos_ += 2;
          std::string close = parse_name();
          if (close != node.name) {
            err("mismatched end tag '" + close + "' for '" + node.name + "'");
          }
          skip_ws();
          expect('>');
          break;
        }
        if (starts_with("<!--")) {
          skip_comment();
          continue;
        }
        node.children.push_back(parse_element());
      } else if (c == '&') {
        text += decode_entity();
        text_significant = true;
      } else {
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') {
          text_significant = true;
        }
        text += c;
        ++pos_;
      }
    }
    if (!node.children.empty()) {
      if (text_significant) {
        err("mixed text and elements in '" + node.name + "'");
      }
      return;  // whitespace between children dropped
    }
    if (text_significant) node.text = std::move(text);
  }
};

void write_canonical(const XmlNode& node, std::string& out) {
  out += '<';
  out += node.name;
  for (const auto& [k, v] : node.attrs) {
    out += ' ';
    out += k;
    out += "=\"";
    out += xml_escape(v);
    out += '"';
  }
  if (node.children.empty() && node.text.empty()) {
    out += "/>";
    return;
  }
  out += '>';
  if (node.children.empty()) {
    out += xml_escape(node.text);
  } else {
    for (const auto& c : node.children) write_canonical(c, out);
  }
  out += "</";
  out += node.name;
  out += '>';
}

void write_pretty(const XmlNode& node, std::string& out, int depth) {
  out.append(static_cast<size_t>(depth) * 2, ' ');
  out += '<';
  out += node.name;
  for (const auto& [k, v] : node.attrs) {
    out += ' ';
    out += k;
    out += "=\"";
    out += xml_escape(v);
    out += '"';
  }
  if (node.children.empty() && node.text.empty()) {
    out += "/>\n";
    return;
  }
  if (node.children.empty()) {
    out += '>';
    out += xml_escape(node.text);
    out += "</";
    out += node.name;
    out += ">\n";
    return;
  }
  out += ">\n";
  for (const auto& c : node.children) write_pretty(c, out, depth + 1);
  out.append(static_cast<size_t>(depth) * 2, ' ');
  out += "</";
  out += node.name;
  out += ">\n";
}

}  // namespace

std::optional<XmlNode> try_parse_xml(std::string_view input, XmlParseError* error) {
  Parser p(input);
  try {
    return p.parse_document();
  } catch (...) {
    if (error) {
      *error = p.failed() ? p.error()
                          : XmlParseError{0, "internal parse failure"};
    }
    return std::nullopt;
  }
}

XmlNode parse_xml(std::string_view input) {
  XmlParseError e;
  auto node = try_parse_xml(input, &e);
  if (!node) {
    fail("MalformedXml",
         e.message + " at offset " + std::to_string(e.offset));
  }
  return *std::move(node);
}

std::string to_canonical_xml(const XmlNode& node) {
  std::string out;
  write_canonical(node, out);
  return out;
}

std::string to_pretty_xml(const XmlNode& node) {
  std::string out;
  write_pretty(node, out, 0);
  return out;
}

std::string xml_escape(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  for (char c : raw) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace cristal
