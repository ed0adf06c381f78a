#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "poly/comparator/comparator.hpp"
#include "poly/core/benchmark.hpp"
#include "poly/core/records.hpp"

namespace poly::harness {

/// Contents of the `--config` JSON file. Secrets never appear here: keys
/// and DSNs are named by environment variable.
struct HarnessConfig {
  std::vector<EndpointInfo> endpoints;
  std::optional<EndpointInfo> judge;
  std::map<std::string, std::string> dsn_env;  // dialect id -> variable holding its DSN
  double rtol = 1e-5;
  double atol = 1e-8;
  std::int64_t timeout_ms = 30000;        // per query
  std::int64_t request_timeout_ms = 120000;  // per model request
  int parallelism = 8;
  std::filesystem::path runs_root = "runs";
  std::filesystem::path data_dir;  // empty: default_data_dir()

  /// Throws ConfigError naming the unknown model id.
  const EndpointInfo& endpoint(std::string_view model_id) const;
  cmp::ComparatorConfig comparator() const;
  std::filesystem::path data() const;
};

/// Throws ConfigError on unknown keys or ill-typed values.
HarnessConfig parse_config(const nlohmann::json& j);
HarnessConfig load_config(const std::filesystem::path& file);

/// DSN for `dialect` from the variable named in the config, else
/// `POLY_<DIALECT>_DSN`. Throws ConfigError naming the variable.
std::string resolve_dsn(const Dialect& dialect, const HarnessConfig& config);

std::string sha256_hex(std::string_view bytes);
// Current UTC time, "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_now();

/// Append-only JSON-lines file shared by worker threads. Opening drops a
/// torn final line left by an interrupted writer.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& file);
  void append(const nlohmann::json& line);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

/// All complete lines of a JSON-lines file; a missing file is empty. A
/// torn final line is ignored; a malformed earlier line throws ParseError.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& file);

// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& file, std::string_view content);

/// A verdicts.jsonl line that could not become an EvalRecord.
struct EvalFailure {
  std::int64_t example_id = 0;
  std::string model_id;
  Dialect dialect;
  std::string message;
};

/// One run under `<runs_root>/<run_id>`: manifest.json, a frozen copy of
/// the benchmark, migration reports and the JSON-lines stores.
class RunDirectory {
 public:
  /// Creates a new run. Throws RunError when the directory already holds a
  /// manifest.
  static RunDirectory create(const std::filesystem::path& runs_root, RunManifest manifest,
                             const BenchmarkSpec& benchmark);
  /// Throws RunError when no run exists there.
  static RunDirectory open(const std::filesystem::path& runs_root, const std::string& run_id);
  /// `ref` is a run id under `runs_root` or a path to a run directory.
  static RunDirectory open_ref(const std::filesystem::path& runs_root, const std::string& ref);

  const RunManifest& manifest() const { return manifest_; }
  const BenchmarkSpec& benchmark() const { return benchmark_; }
  const std::filesystem::path& path() const { return dir_; }

  /// Fails with ConfigError when tolerances, timeout or benchmark differ
  /// from the frozen values.
  void check_compatible(const RunManifest& requested) const;
  /// Records a dialect or endpoint the first time it is used. An endpoint
  /// id already present with different settings is a ConfigError.
  void add_dialect(const Dialect& dialect);
  void add_endpoint(const EndpointInfo& endpoint);

  std::filesystem::path manifest_file() const { return dir_ / "manifest.json"; }
  std::filesystem::path benchmark_file() const { return dir_ / "benchmark.json"; }
  std::filesystem::path migration_report(const Dialect& dialect, const std::string& db_id) const;
  std::filesystem::path predictions_file() const { return dir_ / "predictions.jsonl"; }
  std::filesystem::path verdicts_file() const { return dir_ / "verdicts.jsonl"; }
  std::filesystem::path classifications_file() const { return dir_ / "gap_classifications.jsonl"; }
  std::filesystem::path status_file() const { return dir_ / "status.json"; }
  std::filesystem::path report_md() const { return dir_ / "report.md"; }
  std::filesystem::path report_csv() const { return dir_ / "report.csv"; }

  std::vector<Prediction> predictions() const;
  std::vector<EvalRecord> verdicts() const;
  std::vector<EvalFailure> eval_failures() const;

  /// status.json holds one entry per (stage, key), e.g. generation of one
  /// model on one dialect.
  nlohmann::json status() const;
  void set_status(const std::string& stage, const std::string& key, const nlohmann::json& value);

 private:
  RunDirectory(std::filesystem::path dir, RunManifest manifest, BenchmarkSpec benchmark);
  void save_manifest() const;

  std::filesystem::path dir_;
  RunManifest manifest_;
  BenchmarkSpec benchmark_;
};

}  // namespace poly::harness
