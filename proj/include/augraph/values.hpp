#pragma once

#include <charconv>
#include <cstdint>
#include <string>

#include "augraph/common.hpp"

namespace augraph {

// A single cell of a tuple. Keys, foreign keys, and categoricals are
// strings (trimmed of outer whitespace at ingest); equality for join
// purposes is exact string equality. Floats are never keys.
struct Value {
  enum class Kind : uint8_t { Missing, Str, Int, Real };

  Kind kind = Kind::Missing;
  std::string s;
  int64_t i = 0;
  double d = 0.0;

  static Value missing() { return Value{}; }
  static Value str(std::string v) {
    Value out;
    out.kind = Kind::Str;
    out.s = std::move(v);
    return out;
  }
  static Value integer(int64_t v) {
    Value out;
    out.kind = Kind::Int;
    out.i = v;
    return out;
  }
  static Value real(double v) {
    Value out;
    out.kind = Kind::Real;
    out.d = v;
    return out;
  }

  bool is_missing() const { return kind == Kind::Missing; }

  json to_json() const {
    switch (kind) {
      case Kind::Missing: return nullptr;
      case Kind::Str: return s;
      case Kind::Int: return i;
      case Kind::Real: return d;
    }
    return nullptr;
  }

  bool operator==(const Value& o) const {
    if (kind != o.kind) return false;
    switch (kind) {
      case Kind::Missing: return true;
      case Kind::Str: return s == o.s;
      case Kind::Int: return i == o.i;
      case Kind::Real: return d == o.d;
    }
    return false;
  }
};

struct AttrType {
  enum class Kind : uint8_t { Key, ForeignKey, Categorical, Integer, Float };

  Kind kind = Kind::Categorical;
  std::string fk_target;  // for ForeignKey
  bool nullable = false;  // missing-allowed ('?' suffix in descriptors)

  bool is_key() const { return kind == Kind::Key; }
  bool is_fk() const { return kind == Kind::ForeignKey; }
  bool is_numeric() const { return kind == Kind::Integer || kind == Kind::Float; }

  std::string to_string() const {
    std::string base;
    switch (kind) {
      case Kind::Key: base = "key"; break;
      case Kind::ForeignKey: base = "fk(" + fk_target + ")"; break;
      case Kind::Categorical: base = "cat"; break;
      case Kind::Integer: base = "int"; break;
      case Kind::Float: base = "float"; break;
    }
    if (nullable) base += "?";
    return base;
  }
};

// Parses a CSV cell according to its declared type. Empty cells become
// Missing only for missing-allowed types; anything else is a validation
// error at the caller's (relation, row, column) position.
inline Value parse_cell(const std::string& raw, const AttrType& type, bool& out_empty) {
  std::string cell = trim(raw);
  out_empty = cell.empty();
  if (cell.empty()) return Value::missing();
  switch (type.kind) {
    case AttrType::Kind::Key:
    case AttrType::Kind::ForeignKey:
    case AttrType::Kind::Categorical:
      return Value::str(std::move(cell));
    case AttrType::Kind::Integer: {
      int64_t v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        fail_validation("unparseable integer value '" + cell + "'");
      return Value::integer(v);
    }
    case AttrType::Kind::Float: {
      char* endp = nullptr;
      double v = std::strtod(cell.c_str(), &endp);
      if (endp != cell.c_str() + cell.size())
        fail_validation("unparseable float value '" + cell + "'");
      return Value::real(v);
    }
  }
  return Value::missing();
}

// Shortest round-trip decimal form, for CSV output and graph exports.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline std::string format_value(const Value& v) {
  switch (v.kind) {
    case Value::Kind::Missing: return "";
    case Value::Kind::Str: return v.s;
    case Value::Kind::Int: return std::to_string(v.i);
    case Value::Kind::Real: return format_double(v.d);
  }
  return "";
}

}  // namespace augraph
