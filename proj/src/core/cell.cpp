#include "poly/core/cell.hpp"

#include <cmath>

namespace poly {

const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::Null: return "null";
    case CellKind::Int: return "int";
    case CellKind::Float: return "float";
    case CellKind::Decimal: return "decimal";
    case CellKind::Text: return "text";
    case CellKind::Bool: return "bool";
    case CellKind::Date: return "date";
    case CellKind::Timestamp: return "timestamp";
    case CellKind::Bytes: return "bytes";
  }
  return "?";
}

bool Cell::operator==(const Cell& other) const {
  // NaN payloads compare equal so codec round-trips are checkable.
  if (kind() == CellKind::Float && other.kind() == CellKind::Float) {
    double a = as_float(), b = other.as_float();
    return a == b ? std::signbit(a) == std::signbit(b) : (std::isnan(a) && std::isnan(b));
  }
  return value_ == other.value_;
}

}  // namespace poly
