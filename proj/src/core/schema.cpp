#include "poly/core/schema.hpp"

#include <set>

#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly {

const char* to_string(TypeKind kind) {
  switch (kind) {
    case TypeKind::Integer: return "integer";
    case TypeKind::Float: return "float";
    case TypeKind::Decimal: return "decimal";
    case TypeKind::Text: return "text";
    case TypeKind::Boolean: return "boolean";
    case TypeKind::Date: return "date";
    case TypeKind::Timestamp: return "timestamp";
    case TypeKind::Bytes: return "bytes";
  }
  return "?";
}

TypeKind parse_type_kind(std::string_view s) {
  for (auto k : {TypeKind::Integer, TypeKind::Float, TypeKind::Decimal, TypeKind::Text, TypeKind::Boolean,
                 TypeKind::Date, TypeKind::Timestamp, TypeKind::Bytes}) {
    if (s == to_string(k)) return k;
  }
  throw ParseError("unknown type kind '" + std::string(s) + "'");
}

LogicalType LogicalType::decimal(int precision, int scale) {
  if (scale < 0 || precision < scale)
    throw SchemaError("decimal needs precision >= scale >= 0, got (" + std::to_string(precision) + "," +
                      std::to_string(scale) + ")");
  return LogicalType{TypeKind::Decimal, precision, scale, true};
}

const ColumnInfo* TableInfo::find_column(std::string_view n) const {
  for (const auto& c : columns)
    if (text::iequals(c.name, n)) return &c;
  return nullptr;
}

const TableInfo* SchemaSnapshot::find_table(std::string_view n) const {
  for (const auto& t : tables)
    if (text::iequals(t.name, n)) return &t;
  return nullptr;
}

void SchemaSnapshot::check_unique_names() const {
  std::set<std::string> seen_tables;
  for (const auto& t : tables) {
    if (!seen_tables.insert(text::to_lower(t.name)).second) throw SchemaError("duplicate table " + t.name);
    std::set<std::string> seen_cols;
    for (const auto& c : t.columns)
      if (!seen_cols.insert(text::to_lower(c.name)).second)
        throw SchemaError("duplicate column " + t.name + "." + c.name);
  }
}

}  // namespace poly
