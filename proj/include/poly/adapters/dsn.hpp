#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "poly/core/dialect.hpp"

namespace poly::adapters {

struct Dsn {
  std::string scheme;  // "sqlite", "quirk", "postgresql", "mysql", "http", ...
  std::string user;
  std::string password;
  std::string host;
  std::optional<int> port;
  std::string database;  // URL path without the leading slash
  std::string path;      // file or directory for embedded engines
  std::map<std::string, std::string> params;
  std::string raw;
};

/// `sqlite:<path>`, `quirk:<dir>`, or `scheme://[user[:pass]@]host[:port][/db][?k=v&...]`.
/// Throws ConfigError when malformed.
Dsn parse_dsn(std::string_view dsn);

/// The DSN with user, password and secret-looking parameters removed.
std::string redact_dsn(std::string_view dsn);

/// `POLY_<DIALECT>_DSN` from the environment, if set.
std::optional<std::string> dsn_from_env(const Dialect& dialect);

/// Target namespace for one benchmark database: lowercase [a-z0-9_],
/// shortened with a hash suffix past `max_len` bytes.
std::string namespace_for(std::string_view benchmark, std::string_view db_id, std::size_t max_len = 63);

}  // namespace poly::adapters
