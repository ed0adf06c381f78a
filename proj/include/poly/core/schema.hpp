#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace poly {

enum class TypeKind : std::uint8_t { Integer, Float, Decimal, Text, Boolean, Date, Timestamp, Bytes };

const char* to_string(TypeKind kind);
TypeKind parse_type_kind(std::string_view text);  // throws ParseError

struct LogicalType {
  TypeKind kind = TypeKind::Text;
  // Only meaningful for Decimal; 0/0 means "undeclared".
  int precision = 0;
  int scale = 0;
  bool nullable = true;

  static LogicalType of(TypeKind k) { return LogicalType{k, 0, 0, true}; }
  static LogicalType decimal(int precision, int scale);  // checks precision >= scale >= 0

  bool operator==(const LogicalType&) const = default;
};

struct ColumnInfo {
  std::string name;
  LogicalType type;
  std::string declared_type;  // as written in the source catalog
  bool operator==(const ColumnInfo&) const = default;
};

struct ForeignKey {
  std::vector<std::string> columns;
  std::string ref_table;
  std::vector<std::string> ref_columns;
  bool operator==(const ForeignKey&) const = default;
};

struct TableInfo {
  std::string name;
  std::vector<ColumnInfo> columns;
  std::optional<std::vector<std::string>> primary_key;
  std::vector<ForeignKey> foreign_keys;

  const ColumnInfo* find_column(std::string_view name) const;  // case-insensitive
  bool operator==(const TableInfo&) const = default;
};

struct SchemaSnapshot {
  std::vector<TableInfo> tables;
  std::map<std::string, std::int64_t> row_counts;

  const TableInfo* find_table(std::string_view name) const;  // case-insensitive
  /// Throws SchemaError if table or column names collide after case-folding.
  void check_unique_names() const;
  bool operator==(const SchemaSnapshot&) const = default;
};

}  // namespace poly
