#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "poly/adapters/session.hpp"
#include "poly/core/benchmark.hpp"
#include "poly/core/schema.hpp"
#include "poly/migration/type_mapping.hpp"

namespace poly::migration {

/// Catalog read of an SQLite database: user tables, declared types mapped by
/// affinity (provisional until inference), PK/FK metadata and row counts.
/// Throws ConnectionError when the file cannot be opened.
SchemaSnapshot introspect_schema(const std::filesystem::path& sqlite_file);

/// Settles each column's logical type from its declared type and the
/// values actually stored: ISO text dates/timestamps are promoted when every
/// sampled non-null value (and then every value) conforms; declared types
/// that the data contradicts are widened so every row stays loadable.
SchemaSnapshot infer_logical_types(const std::filesystem::path& sqlite_file, const SchemaSnapshot& snapshot,
                                   std::size_t sample_limit = 1000);

enum class DdlMode { Load, Prompt };

/// CREATE TABLE statements for `dialect`. Load mode carries no key, NOT NULL
/// or UNIQUE constraints; prompt mode adds PK/FK clauses for schema linking.
std::string render_target_ddl(const SchemaSnapshot& snapshot, const Dialect& dialect, const TypeMappingTable& mapping,
                              DdlMode mode);

/// Converts a source value to the representation loaded for `type`.
/// Throws MigrationError when the value does not fit.
Cell coerce_cell(const Cell& cell, const LogicalType& type);

/// Copies every row of every table in `batch_size` batches, one transaction
/// per table. Returns rows loaded per table. Throws MigrationError naming
/// table, batch offset and the engine message.
std::map<std::string, std::int64_t> transfer_data(adapters::Session& source, adapters::Session& target,
                                                  const SchemaSnapshot& snapshot, std::size_t batch_size = 10000);

struct ColumnChecksum {
  std::string column;
  std::uint64_t source = 0;
  std::uint64_t target = 0;
  bool operator==(const ColumnChecksum&) const = default;
};

struct TableReport {
  std::string table;
  std::int64_t source_rows = 0;
  std::int64_t target_rows = 0;
  std::vector<ColumnChecksum> checksums;
  bool matches() const;
  bool operator==(const TableReport&) const = default;
};

struct MigrationReport {
  std::string db_id;
  Dialect dialect;
  std::string target_namespace;
  std::vector<TableReport> tables;
  std::vector<std::string> promoted;  // "table.column" now date or timestamp
  std::vector<std::string> widened;   // "table.column" whose declared type the data overrides
  double elapsed_ms = 0;
  SchemaSnapshot snapshot;            // inferred schema used for the load

  bool verified() const;
  bool operator==(const MigrationReport&) const = default;
};

/// Recounts rows and recomputes order-insensitive per-column checksums on
/// both sides. Mismatches are report content, not errors.
MigrationReport verify_migration(adapters::Session& source, adapters::Session& target, const SchemaSnapshot& snapshot);

struct MigrationConfig {
  std::string target_dsn;
  TypeMappingTable mapping = TypeMappingTable::defaults();
  std::size_t sample_limit = 1000;
  std::size_t batch_size = 10000;
  std::size_t parallelism = 1;  // databases migrated concurrently
};

struct MigrationSummary {
  std::map<std::string, MigrationReport> reports;
  std::map<std::string, std::string> failures;  // db_id -> message
  bool all_verified() const;
};

/// Full pipeline per database into namespace `<benchmark>__<db_id>`. The
/// namespace is dropped and recreated, so re-running is idempotent. A
/// failure aborts only its own database.
MigrationSummary migrate(const BenchmarkSpec& benchmark, const Dialect& dialect, const MigrationConfig& config);

/// One database; throws on any phase error.
MigrationReport migrate_database(const std::string& benchmark_name, const std::string& db_id,
                                 const std::filesystem::path& source_file, const Dialect& dialect,
                                 const MigrationConfig& config);

void to_json(nlohmann::json& j, const MigrationReport& r);
void from_json(const nlohmann::json& j, MigrationReport& r);
void write_report(const std::filesystem::path& path, const MigrationReport& report);
MigrationReport read_report(const std::filesystem::path& path);

}  // namespace poly::migration
