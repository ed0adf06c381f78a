#include "poly/adapters/session.hpp"

#include <fmt/format.h>

#include <array>

#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

void Session::scan_table(const std::string& table, const std::vector<std::string>& columns, std::size_t batch_size,
                         const std::function<void(const std::vector<Row>&)>& sink) {
  std::string sql = "SELECT ";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) sql += ", ";
    sql += quote_identifier(dialect(), columns[i]);
  }
  sql += " FROM " + quote_identifier(dialect(), table);
  auto outcome = execute(sql, 3'600'000);
  if (auto* err = std::get_if<EngineErrorOutcome>(&outcome)) throw MigrationError("scan of " + table + " failed: " + err->message);
  if (std::holds_alternative<TimeoutOutcome>(outcome)) throw MigrationError("scan of " + table + " timed out");
  const auto& rows = std::get<OkOutcome>(outcome).result.rows();
  if (batch_size == 0) batch_size = rows.size();
  for (std::size_t at = 0; at < rows.size(); at += batch_size) {
    std::vector<Row> batch(rows.begin() + at, rows.begin() + std::min(rows.size(), at + batch_size));
    sink(batch);
  }
}

std::int64_t Session::count_rows(const std::string& table) {
  auto outcome = execute("SELECT COUNT(*) FROM " + quote_identifier(dialect(), table), 3'600'000);
  auto* ok = std::get_if<OkOutcome>(&outcome);
  if (!ok) {
    auto* err = std::get_if<EngineErrorOutcome>(&outcome);
    throw MigrationError("row count of " + table + " failed" + (err ? ": " + err->message : std::string(" (timeout)")));
  }
  const Cell& c = ok->result.at(0, 0);
  if (c.kind() == CellKind::Int) return c.as_int();
  if (c.kind() == CellKind::Decimal) return static_cast<std::int64_t>(c.as_decimal().unscaled());
  throw MigrationError("row count of " + table + " returned a non-integer");
}

std::string quote_identifier(const Dialect& dialect, std::string_view name) {
  const auto& id = dialect.id();
  char q = (id == "mysql" || id == "clickhouse" || id == "bigquery") ? '`' : '"';
  std::string out(1, q);
  for (char c : name) {
    if (c == q) out += q;
    out += c;
  }
  out += q;
  return out;
}

ErrorKind classify_message(std::string_view message) {
  static constexpr std::array syntax{"syntax", "no such function", "unrecognized token", "incomplete input",
                                     "unknown function", "parse error"};
  static constexpr std::array semantic{"no such table", "no such column", "ambiguous", "misuse of aggregate",
                                       "does not exist", "unknown column", "unknown table", "unknown identifier",
                                       "wrong number of arguments", "must appear in the group by", "not found",
                                       "doesn't exist", "type mismatch", "cannot be applied"};
  static constexpr std::array constraint{"constraint", "violat", "duplicate key", "duplicate entry"};
  static constexpr std::array connection{"unable to open", "database is locked", "connection", "could not connect",
                                         "server closed", "lost connection", "network"};
  auto any = [&](const auto& needles) {
    for (const char* n : needles)
      if (text::icontains(message, n)) return true;
    return false;
  };
  if (any(syntax)) return ErrorKind::Syntax;
  if (any(semantic)) return ErrorKind::Semantic;
  if (any(constraint)) return ErrorKind::Constraint;
  if (any(connection)) return ErrorKind::Connection;
  return ErrorKind::Other;
}

}  // namespace poly::adapters
