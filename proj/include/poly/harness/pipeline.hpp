#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "poly/adapters/chat.hpp"
#include "poly/core/records.hpp"
#include "poly/core/schema.hpp"
#include "poly/gapscope/gapscope.hpp"
#include "poly/harness/run.hpp"
#include "poly/migration/migration.hpp"

namespace poly::harness {

/// Migrates every registered database of the run's benchmark into
/// `dialect` and stores one report per database under migration/. The
/// benchmark's own source dialect needs no migration.
migration::MigrationSummary migrate_run(RunDirectory& run, const Dialect& dialect, const HarnessConfig& config);

/// Inferred schema of a database as seen by `dialect`: the verified
/// migration report for targets, a fresh inference for the source dialect.
/// Throws RunError when the database is not migrated or not verified.
SchemaSnapshot run_schema(const RunDirectory& run, const Dialect& dialect, const std::string& db_id);

/// Comparator settings frozen in the run manifest.
cmp::ComparatorConfig run_comparator(const RunDirectory& run);

/// Prompt-mode DDL of one database in `dialect`.
std::string prompt_ddl(const RunDirectory& run, const Dialect& dialect, const std::string& db_id);

struct GenerationSummary {
  std::size_t expected = 0;   // benchmark examples
  std::size_t existing = 0;   // already predicted before this call
  std::size_t requested = 0;  // examples sent to the endpoint
  std::size_t written = 0;
  std::size_t failed = 0;
  bool complete = false;
  std::string message;  // first failure, empty when complete
};

struct GenerateOptions {
  int parallelism = 8;
  adapters::RetryPolicy retry;
};

/// One prediction per benchmark example for (endpoint, dialect), appended
/// to predictions.jsonl. Examples already predicted are skipped. A rejected
/// credential stops all requests; exhausted retries skip the example. Either
/// leaves the run marked incomplete in status.json.
GenerationSummary generate_predictions(RunDirectory& run, const Dialect& dialect, const EndpointInfo& endpoint,
                                       const HarnessConfig& config, const GenerateOptions& options);

struct EvaluationSummary {
  std::size_t evaluated = 0;
  std::size_t existing = 0;  // verdicts already present
  std::size_t correct = 0;
  std::size_t errors = 0;    // predictions naming unknown examples
};

/// Dual execution of every pending prediction for `dialect` (optionally one
/// model), appended to verdicts.jsonl. Refuses to start when a database the
/// predictions touch is not migrated and verified.
EvaluationSummary run_evaluation(RunDirectory& run, const Dialect& dialect, const HarnessConfig& config,
                                 const std::optional<std::string>& model = std::nullopt, int parallelism = 8);

struct ClassificationSummary {
  std::size_t gaps = 0;
  std::size_t existing = 0;
  std::size_t classified = 0;
};

/// Gap errors of every target dialect in the run against the source
/// dialect, classified by `judge` and appended to
/// gap_classifications.jsonl. Gaps already classified are skipped. When the
/// judge becomes unreachable the finished classifications are kept and
/// JudgeUnavailable propagates.
ClassificationSummary classify_run(RunDirectory& run, gap::Judge& judge, const gap::ClassifyOptions& options);

std::vector<gap::Classification> read_classifications(const RunDirectory& run);

struct TranspileResult {
  bool ok = false;
  std::string sql;    // transpiled text when ok
  std::string error;  // exit status and stderr otherwise
};

/// Runs `<plugin> --from <d> --to <d>` with `sql` on stdin. A non-zero exit
/// or empty output is a failure. Throws ConfigError when the plugin cannot
/// be executed.
TranspileResult transpile_external(const std::string& sql, const Dialect& from, const Dialect& to,
                                   const std::string& plugin);

struct TranspileSummary {
  std::size_t total = 0;
  std::size_t transpiled = 0;
  std::size_t existing = 0;
  double coverage() const { return total ? static_cast<double>(transpiled) / static_cast<double>(total) : 0.0; }
};

/// Transpiles the run's `from` predictions into `to` predictions under
/// model id `<model>@<from>`. Failed transpilations are not stored, so they
/// reduce coverage.
TranspileSummary transpile_predictions(RunDirectory& run, const Dialect& from, const Dialect& to,
                                       const std::string& plugin);

}  // namespace poly::harness
