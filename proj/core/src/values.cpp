#include "cristal/values.hpp"

#include <algorithm>
#include <cctype>

#include "cristal/errors.hpp"

namespace cristal {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool digits_at(std::string_view s, size_t pos, size_t count) {
  if (pos + count > s.size()) return false;
  for (size_t i = 0; i < count; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[pos + i]))) return false;
  }
  return true;
}

int two_digits(std::string_view s, size_t pos) {
  return (s[pos] - '0') * 10 + (s[pos + 1] - '0');
}

}  // namespace

std::string_view kind_name(ValueKind kind) {
  switch (kind) {
    case ValueKind::String: return "string";
    case ValueKind::Integer: return "integer";
    case ValueKind::Decimal: return "decimal";
    case ValueKind::Boolean: return "boolean";
    case ValueKind::Timestamp: return "timestamp";
    case ValueKind::Composite: return "composite";
    case ValueKind::Any: return "any";
  }
  return "string";
}

std::optional<ValueKind> kind_from_name(std::string_view name) {
  if (name == "string") return ValueKind::String;
  if (name == "integer") return ValueKind::Integer;
  if (name == "decimal") return ValueKind::Decimal;
  if (name == "boolean") return ValueKind::Boolean;
  if (name == "timestamp") return ValueKind::Timestamp;
  if (name == "composite") return ValueKind::Composite;
  if (name == "any") return ValueKind::Any;
  return std::nullopt;
}

bool is_scalar_kind(ValueKind kind) {
  return kind != ValueKind::Composite && kind != ValueKind::Any;
}

bool lex_integer(std::string_view text) {
  if (!text.empty() && text.front() == '-') text.remove_prefix(1);
  return all_digits(text);
}

bool lex_decimal(std::string_view text) {
  if (!text.empty() && text.front() == '-') text.remove_prefix(1);
  auto dot = text.find('.');
  if (dot == std::string_view::npos) return all_digits(text);
  return all_digits(text.substr(0, dot)) && all_digits(text.substr(dot + 1));
}

bool lex_boolean(std::string_view text) {
  return text == "true" || text == "false";
}

bool lex_timestamp(std::string_view text) {
  // YYYY-MM-DDThh:mm:ss.sssZ, 24 characters exactly.
  if (text.size() != 24) return false;
  if (!digits_at(text, 0, 4) || text[4] != '-' || !digits_at(text, 5, 2) ||
      text[7] != '-' || !digits_at(text, 8, 2) || text[10] != 'T' ||
      !digits_at(text, 11, 2) || text[13] != ':' || !digits_at(text, 14, 2) ||
      text[16] != ':' || !digits_at(text, 17, 2) || text[19] != '.' ||
      !digits_at(text, 20, 3) || text[23] != 'Z') {
    return false;
  }
  int month = two_digits(text, 5);
  int day = two_digits(text, 8);
  int hour = two_digits(text, 11);
  int minute = two_digits(text, 14);
  int second = two_digits(text, 17);
  return month >= 1 && month <= 12 && day >= 1 && day <= 31 && hour <= 23 &&
         minute <= 59 && second <= 60;
}

bool lexes_as(ValueKind kind, std::string_view text) {
  switch (kind) {
    case ValueKind::String: return true;
    case ValueKind::Integer: return lex_integer(text);
    case ValueKind::Decimal: return lex_decimal(text);
    case ValueKind::Boolean: return lex_boolean(text);
    case ValueKind::Timestamp: return lex_timestamp(text);
    case ValueKind::Composite:
    case ValueKind::Any: return false;
  }
  return false;
}

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  unsigned char first = static_cast<unsigned char>(text.front());
  if (!std::isalpha(first) && first != '_') return false;
  return std::all_of(text.begin() + 1, text.end(), [](unsigned char c) {
    return std::isalnum(c) != 0 || c == '_' || c == '-';
  });
}

std::optional<Decimal> Decimal::parse(std::string_view text) {
  if (!lex_decimal(text) || text.empty()) return std::nullopt;
  Decimal d;
  if (text.front() == '-') {
    d.negative_ = true;
    text.remove_prefix(1);
  }
  auto dot = text.find('.');
  if (dot == std::string_view::npos) {
    d.int_digits_ = std::string(text);
  } else {
    d.int_digits_ = std::string(text.substr(0, dot));
    d.frac_digits_ = std::string(text.substr(dot + 1));
  }
  d.normalize();
  return d;
}

void Decimal::normalize() {
  size_t first = int_digits_.find_first_not_of('0');
  int_digits_ = first == std::string::npos ? "0" : int_digits_.substr(first);
  size_t last = frac_digits_.find_last_not_of('0');
  frac_digits_ = last == std::string::npos ? "" : frac_digits_.substr(0, last + 1);
  if (int_digits_ == "0" && frac_digits_.empty()) negative_ = false;
}

int Decimal::compare_magnitudes(const Decimal& a, const Decimal& b) {
  if (a.int_digits_.size() != b.int_digits_.size()) {
    return a.int_digits_.size() < b.int_digits_.size() ? -1 : 1;
  }
  if (int c = a.int_digits_.compare(b.int_digits_); c != 0) return c < 0 ? -1 : 1;
  size_t n = std::max(a.frac_digits_.size(), b.frac_digits_.size());
  for (size_t i = 0; i < n; ++i) {
    char ca = i < a.frac_digits_.size() ? a.frac_digits_[i] : '0';
    char cb = i < b.frac_digits_.size() ? b.frac_digits_[i] : '0';
    if (ca != cb) return ca < cb ? -1 : 1;
  }
  return 0;
}

Decimal Decimal::add_magnitudes(const Decimal& a, const Decimal& b) {
  size_t frac_len = std::max(a.frac_digits_.size(), b.frac_digits_.size());
  std::string fa = a.frac_digits_, fb = b.frac_digits_;
  fa.resize(frac_len, '0');
  fb.resize(frac_len, '0');
  std::string da = a.int_digits_ + fa;
  std::string db = b.int_digits_ + fb;
  size_t int_len = std::max(a.int_digits_.size(), b.int_digits_.size());
  da.insert(0, int_len - a.int_digits_.size(), '0');
  db.insert(0, int_len - b.int_digits_.size(), '0');

  std::string sum(da.size() + 1, '0');
  int carry = 0;
  for (size_t i = da.size(); i-- > 0;) {
    int v = (da[i] - '0') + (db[i] - '0') + carry;
    sum[i + 1] = static_cast<char>('0' + v % 10);
    carry = v / 10;
  }
  sum[0] = static_cast<char>('0' + carry);

  Decimal r;
  r.int_digits_ = sum.substr(0, int_len + 1);
  r.frac_digits_ = sum.substr(int_len + 1);
  r.normalize();
  return r;
}

Decimal Decimal::sub_magnitudes(const Decimal& a, const Decimal& b) {
  // Requires |a| >= |b|.
  size_t frac_len = std::max(a.frac_digits_.size(), b.frac_digits_.size());
  std::string fa = a.frac_digits_, fb = b.frac_digits_;
  fa.resize(frac_len, '0');
  fb.resize(frac_len, '0');
  std::string da = a.int_digits_ + fa;
  std::string db = b.int_digits_ + fb;
  db.insert(0, da.size() - db.size(), '0');

  std::string diff(da.size(), '0');
  int borrow = 0;
  for (size_t i = da.size(); i-- > 0;) {
    int v = (da[i] - '0') - (db[i] - '0') - borrow;
    if (v < 0) {
      v += 10;
      borrow = 1;
    } else {
      borrow = 0;
    }
    diff[i] = static_cast<char>('0' + v);
  }

  Decimal r;
  r.int_digits_ = diff.substr(0, a.int_digits_.size());
  r.frac_digits_ = diff.substr(a.int_digits_.size());
  r.normalize();
  return r;
}

Decimal Decimal::add(const Decimal& other) const {
  Decimal r;
  if (negative_ == other.negative_) {
    r = add_magnitudes(*this, other);
    r.negative_ = negative_;
  } else {
    int c = compare_magnitudes(*this, other);
    if (c == 0) return Decimal();
    const Decimal& big = c > 0 ? *this : other;
    const Decimal& small = c > 0 ? other : *this;
    r = sub_magnitudes(big, small);
    r.negative_ = big.negative_;
  }
  r.normalize();
  return r;
}

int Decimal::compare(const Decimal& other) const {
  if (negative_ != other.negative_) return negative_ ? -1 : 1;
  int c = compare_magnitudes(*this, other);
  return negative_ ? -c : c;
}

std::string Decimal::str() const {
  std::string out;
  if (negative_) out += '-';
  out += int_digits_;
  if (!frac_digits_.empty()) {
    out += '.';
    out += frac_digits_;
  }
  return out;
}

int compare_typed(ValueKind kind, std::string_view lhs, std::string_view rhs) {
  if (kind == ValueKind::Integer || kind == ValueKind::Decimal) {
    auto a = Decimal::parse(lhs);
    auto b = Decimal::parse(rhs);
    if (a && b) return a->compare(*b);
    // Fall through to lexical order for non-numeric text.
  }
  if (kind == ValueKind::Boolean) {
    int a = lhs == "true" ? 1 : 0;
    int b = rhs == "true" ? 1 : 0;
    return a - b;
  }
  int c = lhs.compare(rhs);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

}  // namespace cristal
