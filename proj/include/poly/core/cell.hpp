#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "poly/core/decimal.hpp"
#include "poly/core/temporal.hpp"

namespace poly {

/// Raw octet string.
struct Bytes {
  std::string octets;
  bool operator==(const Bytes&) const = default;
};

// Order matches the variant alternatives of Cell::Value.
enum class CellKind : std::uint8_t { Null, Int, Float, Decimal, Text, Bool, Date, Timestamp, Bytes };

const char* to_string(CellKind kind);

/// Engine-neutral value. Equality (`==`) is structural: same alternative,
/// same payload, Decimal scale included. Semantic equality lives in the
/// comparator.
class Cell {
 public:
  using Value = std::variant<std::monostate, std::int64_t, double, Decimal, std::string, bool, Date,
                             Timestamp, Bytes>;

  Cell() = default;

  static Cell null() { return Cell(); }
  static Cell integer(std::int64_t v) { return Cell(Value(std::in_place_index<1>, v)); }
  static Cell floating(double v) { return Cell(Value(std::in_place_index<2>, v)); }
  static Cell decimal(Decimal v) { return Cell(Value(std::in_place_index<3>, std::move(v))); }
  static Cell text(std::string v) { return Cell(Value(std::in_place_index<4>, std::move(v))); }
  static Cell boolean(bool v) { return Cell(Value(std::in_place_index<5>, v)); }
  static Cell date(Date v) { return Cell(Value(std::in_place_index<6>, v)); }
  static Cell timestamp(Timestamp v) { return Cell(Value(std::in_place_index<7>, v)); }
  static Cell bytes(std::string octets) { return Cell(Value(std::in_place_index<8>, Bytes{std::move(octets)})); }

  CellKind kind() const { return static_cast<CellKind>(value_.index()); }
  bool is_null() const { return kind() == CellKind::Null; }
  bool is_numeric() const {
    auto k = kind();
    return k == CellKind::Int || k == CellKind::Float || k == CellKind::Decimal;
  }
  bool is_temporal() const { return kind() == CellKind::Date || kind() == CellKind::Timestamp; }

  std::int64_t as_int() const { return std::get<1>(value_); }
  double as_float() const { return std::get<2>(value_); }
  const Decimal& as_decimal() const { return std::get<3>(value_); }
  const std::string& as_text() const { return std::get<4>(value_); }
  bool as_bool() const { return std::get<5>(value_); }
  Date as_date() const { return std::get<6>(value_); }
  Timestamp as_timestamp() const { return std::get<7>(value_); }
  const Bytes& as_bytes() const { return std::get<8>(value_); }

  const Value& value() const { return value_; }

  bool operator==(const Cell& other) const;

 private:
  explicit Cell(Value v) : value_(std::move(v)) {}
  Value value_;
};

}  // namespace poly
