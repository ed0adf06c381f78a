#include "poly/migration/type_mapping.hpp"

#include <fmt/format.h>

#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly::migration {

namespace {

constexpr TypeKind kAllKinds[] = {TypeKind::Integer, TypeKind::Float,   TypeKind::Decimal,   TypeKind::Text,
                                  TypeKind::Boolean, TypeKind::Date,    TypeKind::Timestamp, TypeKind::Bytes};

}  // namespace

TypeMappingTable TypeMappingTable::defaults() {
  TypeMappingTable t;
  auto add = [&](const Dialect& d, std::initializer_list<const char*> names) {
    auto it = names.begin();
    for (TypeKind k : kAllKinds) t.set(k, d, *it++);
  };
  //                             Integer     Float               Decimal            Text       Boolean    Date     Timestamp      Bytes
  add(Dialect::postgres(),      {"BIGINT", "DOUBLE PRECISION", "NUMERIC({p},{s})", "TEXT", "BOOLEAN", "DATE", "TIMESTAMP", "BYTEA"});
  add(Dialect::mysql(),         {"BIGINT", "DOUBLE", "DECIMAL({p},{s})", "LONGTEXT", "BOOLEAN", "DATE", "DATETIME(6)", "LONGBLOB"});
  add(Dialect::clickhouse(),    {"Nullable(Int64)", "Nullable(Float64)", "Nullable(Decimal({p}, {s}))", "Nullable(String)",
                                 "Nullable(Bool)", "Nullable(Date32)", "Nullable(DateTime64(6, 'UTC'))", "Nullable(String)"});
  add(Dialect::snowflake(),     {"NUMBER(38,0)", "FLOAT", "NUMBER({p},{s})", "VARCHAR", "BOOLEAN", "DATE", "TIMESTAMP_NTZ(6)", "BINARY"});
  add(Dialect::bigquery(),      {"INT64", "FLOAT64", "BIGNUMERIC({p}, {s})", "STRING", "BOOL", "DATE", "DATETIME", "BYTES"});
  add(Dialect::sqlite(),        {"INTEGER", "REAL", "NUMERIC({p},{s})", "TEXT", "BOOLEAN", "DATE", "TIMESTAMP", "BLOB"});
  add(Dialect::quirk(),         {"INTEGER", "REAL", "NUMERIC({p},{s})", "TEXT", "BOOLEAN", "DATE", "TIMESTAMP", "BLOB"});
  t.set_max_decimal_precision(Dialect::postgres(), 1000);
  t.set_max_decimal_precision(Dialect::mysql(), 65);
  t.set_max_decimal_precision(Dialect::clickhouse(), 76);
  t.set_max_decimal_precision(Dialect::snowflake(), 38);
  t.set_max_decimal_precision(Dialect::bigquery(), 76);
  return t;
}

void TypeMappingTable::set(TypeKind kind, const Dialect& dialect, std::string type_name) {
  names_[{dialect.id(), kind}] = std::move(type_name);
}

void TypeMappingTable::set_max_decimal_precision(const Dialect& dialect, int precision) {
  max_precision_[dialect.id()] = precision;
}

std::vector<Dialect> TypeMappingTable::dialects() const {
  std::vector<Dialect> out;
  for (const auto& [key, _] : names_) {
    auto d = Dialect::parse(key.first);
    if (out.empty() || out.back() != d) out.push_back(d);
  }
  return out;
}

bool TypeMappingTable::covers(const Dialect& dialect) const {
  for (TypeKind k : kAllKinds)
    if (!names_.count({dialect.id(), k})) return false;
  return true;
}

void TypeMappingTable::validate() const {
  std::vector<std::string> missing;
  for (const auto& d : dialects())
    for (TypeKind k : kAllKinds)
      if (!names_.count({d.id(), k})) missing.push_back(fmt::format("({}, {})", to_string(k), d.id()));
  if (!missing.empty()) throw ConfigError("type mapping incomplete: " + fmt::format("{}", fmt::join(missing, ", ")));
}

std::string TypeMappingTable::render(const LogicalType& type, const Dialect& dialect) const {
  auto it = names_.find({dialect.id(), type.kind});
  if (it == names_.end())
    throw ConfigError(fmt::format("no type mapping for ({}, {})", to_string(type.kind), dialect.id()));
  if (type.kind != TypeKind::Decimal) return it->second;
  int p = type.precision > 0 ? type.precision : 38;
  int s = type.precision > 0 ? type.scale : 10;
  if (auto lim = max_precision_.find(dialect.id()); lim != max_precision_.end() && lim->second > 0 && p > lim->second)
    throw ConfigError(fmt::format("decimal({},{}) exceeds the {} precision limit of {}", p, s, dialect.id(), lim->second));
  return text::replace_all(text::replace_all(it->second, "{p}", std::to_string(p)), "{s}", std::to_string(s));
}

TypeMappingTable TypeMappingTable::from_json(const nlohmann::json& j, TypeMappingTable base) {
  if (!j.is_object()) throw ConfigError("type mapping must be a JSON object");
  for (const auto& [dialect, kinds] : j.items()) {
    if (!kinds.is_object()) throw ConfigError("type mapping for " + dialect + " must be an object");
    for (const auto& [kind, name] : kinds.items()) {
      if (!name.is_string()) throw ConfigError(fmt::format("type mapping {}.{} must be a string", dialect, kind));
      try {
        base.set(parse_type_kind(kind), Dialect::parse(dialect), name.get<std::string>());
      } catch (const ParseError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  base.validate();
  return base;
}

nlohmann::json TypeMappingTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, name] : names_) j[key.first][to_string(key.second)] = name;
  return j;
}

}  // namespace poly::migration
