#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace cristal {

// Scalar kinds a schema element or attribute may carry, plus Composite for
// nested elements and Any for the wildcard subtree used by the built-in
// description schemas.
enum class ValueKind {
  String,
  Integer,
  Decimal,
  Boolean,
  Timestamp,
  Composite,
  Any,
};

std::string_view kind_name(ValueKind kind);
std::optional<ValueKind> kind_from_name(std::string_view name);
bool is_scalar_kind(ValueKind kind);

// Lexical checks for scalar literals.
//   integer:   -?[0-9]+
//   decimal:   -?[0-9]+(\.[0-9]+)?
//   boolean:   true|false
//   timestamp: YYYY-MM-DDThh:mm:ss.sssZ (UTC, milliseconds, range-checked)
bool lex_integer(std::string_view text);
bool lex_decimal(std::string_view text);
bool lex_boolean(std::string_view text);
bool lex_timestamp(std::string_view text);
bool lexes_as(ValueKind kind, std::string_view text);

// Identifier used for schema/element/property/activity names: a C-style name.
bool is_identifier(std::string_view text);

// Exact decimal arithmetic over the literal grammar above. Values are kept
// normalized: no leading zeros in the integer part, no trailing zeros in the
// fraction, no negative zero.
class Decimal {
public:
  static std::optional<Decimal> parse(std::string_view text);

  Decimal add(const Decimal& other) const;
  // <0, 0, >0 like strcmp.
  int compare(const Decimal& other) const;
  std::string str() const;

private:
  Decimal() = default;
  bool negative_ = false;
  std::string int_digits_ = "0";
  std::string frac_digits_;

  void normalize();
  static Decimal add_magnitudes(const Decimal& a, const Decimal& b);
  static Decimal sub_magnitudes(const Decimal& a, const Decimal& b);
  static int compare_magnitudes(const Decimal& a, const Decimal& b);
};

// Typed comparison used by the atlas and the script engine. Numeric kinds
// compare by value, timestamps and strings lexically, booleans by equality
// ordering false < true.
int compare_typed(ValueKind kind, std::string_view lhs, std::string_view rhs);

}  // namespace cristal
