#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "poly/core/dialect.hpp"
#include "poly/core/schema.hpp"

namespace poly::migration {

/// Target type names per (logical kind, dialect). Decimal templates may use
/// `{p}` and `{s}` for precision and scale.
class TypeMappingTable {
 public:
  /// Mapping for every built-in dialect.
  static TypeMappingTable defaults();

  /// Overlays entries from `{"<dialect>": {"<kind>": "<type>", ...}, ...}`,
  /// then validates totality. Throws ConfigError.
  static TypeMappingTable from_json(const nlohmann::json& j, TypeMappingTable base = defaults());
  nlohmann::json to_json() const;

  void set(TypeKind kind, const Dialect& dialect, std::string type_name);
  // Largest decimal precision the dialect accepts (0 = unbounded).
  void set_max_decimal_precision(const Dialect& dialect, int precision);

  /// Throws ConfigError listing every (kind, dialect) pair missing for the
  /// dialects present in the table.
  void validate() const;
  bool covers(const Dialect& dialect) const;
  std::vector<Dialect> dialects() const;

  /// Concrete type text. Throws ConfigError naming (kind, dialect) when
  /// unmapped, and when a decimal exceeds the dialect's precision limit.
  std::string render(const LogicalType& type, const Dialect& dialect) const;

 private:
  std::map<std::pair<std::string, TypeKind>, std::string> names_;
  std::map<std::string, int> max_precision_;
};

}  // namespace poly::migration
