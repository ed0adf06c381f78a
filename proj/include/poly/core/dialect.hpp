#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace poly {

/// SQL dialect identifier. The built-in ids are listed in `builtin()`; any
/// other lowercase `[a-z0-9_]+` key is accepted as an extension dialect.
class Dialect {
 public:
  Dialect() = default;

  /// Lowercases and validates `id`. Throws ParseError on an empty or
  /// malformed key.
  static Dialect parse(std::string_view id);

  static Dialect sqlite() { return Dialect("sqlite"); }
  static Dialect postgres() { return Dialect("postgres"); }
  static Dialect mysql() { return Dialect("mysql"); }
  static Dialect clickhouse() { return Dialect("clickhouse"); }
  static Dialect snowflake() { return Dialect("snowflake"); }
  static Dialect bigquery() { return Dialect("bigquery"); }
  static Dialect quirk() { return Dialect("quirk"); }

  static const std::vector<Dialect>& builtin();

  const std::string& id() const { return id_; }
  bool is_builtin() const;
  // sqlite and quirk share the embedded engine.
  bool is_sqlite_family() const { return id_ == "sqlite" || id_ == "quirk"; }

  // Upper-cased id used in `POLY_<DIALECT>_DSN`.
  std::string env_key() const;

  auto operator<=>(const Dialect&) const = default;

 private:
  explicit Dialect(std::string id) : id_(std::move(id)) {}
  std::string id_;
};

}  // namespace poly
