#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "poly/core/errors.hpp"
#include "poly/core/records.hpp"
#include "poly/core/schema.hpp"

namespace poly::adapters {

/// A driver value that cannot be represented as a Cell. Sessions turn it
/// into an EngineError outcome for the whole execution.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// One live engine connection. Not thread-safe; a pool hands each session
/// to one worker at a time.
class Session {
 public:
  virtual ~Session() = default;

  virtual Dialect dialect() const = 0;

  /// Runs a single read-only statement. Never throws for SQL-level
  /// failures; those come back as EngineError or Timeout outcomes.
  virtual ExecutionOutcome execute(std::string_view sql, std::int64_t timeout_ms) = 0;

  /// Cheap liveness probe used on pool checkout.
  virtual bool healthy() = 0;

  // ---- write path, used by migration only. These throw on failure.

  /// Drops and recreates the session's namespace, leaving it empty.
  virtual void reset_namespace() = 0;
  /// Executes one or more DDL statements.
  virtual void exec_script(std::string_view sql) = 0;
  virtual void begin() = 0;
  virtual void commit() = 0;
  virtual void rollback() = 0;
  virtual void insert_rows(const std::string& table, const std::vector<std::string>& columns,
                           const std::vector<LogicalType>& types, const std::vector<Row>& rows) = 0;

  /// Streams every row of `table` (given columns, in order) in batches.
  virtual void scan_table(const std::string& table, const std::vector<std::string>& columns, std::size_t batch_size,
                          const std::function<void(const std::vector<Row>&)>& sink);
  virtual std::int64_t count_rows(const std::string& table);
};

// Identifier quoting per dialect: "x" or `x`, with the quote doubled inside.
std::string quote_identifier(const Dialect& dialect, std::string_view name);

/// Best-effort error kind from an engine message (engines without
/// structured codes).
ErrorKind classify_message(std::string_view message);

}  // namespace poly::adapters
