#include "poly/core/dialect.hpp"

#include <algorithm>

#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly {

Dialect Dialect::parse(std::string_view id) {
  std::string key = text::to_lower(text::trim(id));
  if (key.empty()) throw ParseError("empty dialect id");
  for (char c : key) {
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_'))
      throw ParseError("malformed dialect id '" + std::string(id) + "'");
  }
  return Dialect(std::move(key));
}

const std::vector<Dialect>& Dialect::builtin() {
  static const std::vector<Dialect> all = {sqlite(), postgres(), mysql(), clickhouse(),
                                           snowflake(), bigquery(), quirk()};
  return all;
}

bool Dialect::is_builtin() const {
  const auto& all = builtin();
  return std::find(all.begin(), all.end(), *this) != all.end();
}

std::string Dialect::env_key() const { return text::to_upper(id_); }

}  // namespace poly
