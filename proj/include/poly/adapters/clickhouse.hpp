#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poly/core/records.hpp"

namespace poly::adapters {

/// Decodes a `TabSeparatedWithNamesAndTypes` body (temporals in ISO form).
/// Throws DecodeError naming the offending column.
ResultSet decode_clickhouse_tsv(std::string_view body);

// One value of a ClickHouse column type, from its unescaped text.
Cell decode_clickhouse_value(std::string_view type, std::string_view value);

// Escaped `TabSeparated` line for one row, newline included.
std::string encode_clickhouse_tsv_row(const Row& row);

struct ClickhouseError {
  std::optional<int> code;
  ErrorKind kind = ErrorKind::Other;
  bool timeout = false;
};
/// Classifies an error response from its exception code (header value or
/// the `Code: N.` prefix of the body).
ClickhouseError classify_clickhouse_error(std::string_view code_header, std::string_view body);

}  // namespace poly::adapters
