#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "poly/core/dialect.hpp"
#include "poly/core/result_set.hpp"

namespace poly {

struct Prediction {
  std::int64_t example_id = 0;
  std::string model_id;
  Dialect dialect;
  std::string sql;
  std::string raw_completion;
  double latency_ms = 0;
  // Set when no SQL could be extracted from the completion.
  std::optional<std::string> extraction_error;
  bool operator==(const Prediction&) const = default;
};

enum class ErrorKind : std::uint8_t { Syntax, Semantic, Constraint, Connection, Other };
const char* to_string(ErrorKind kind);
ErrorKind parse_error_kind(std::string_view text);

struct OkOutcome {
  ResultSet result;
  double elapsed_ms = 0;
  bool operator==(const OkOutcome&) const = default;
};
struct EngineErrorOutcome {
  ErrorKind kind = ErrorKind::Other;
  std::string message;
  bool operator==(const EngineErrorOutcome&) const = default;
};
struct TimeoutOutcome {
  std::int64_t limit_ms = 0;
  bool operator==(const TimeoutOutcome&) const = default;
};

using ExecutionOutcome = std::variant<OkOutcome, EngineErrorOutcome, TimeoutOutcome>;

inline bool is_ok(const ExecutionOutcome& o) { return std::holds_alternative<OkOutcome>(o); }

enum class IncorrectReason : std::uint8_t { ResultMismatch, PredError, PredTimeout };
const char* to_string(IncorrectReason r);

struct Correct {
  bool operator==(const Correct&) const = default;
};
struct Incorrect {
  IncorrectReason reason = IncorrectReason::ResultMismatch;
  std::string detail;  // comparator reason or engine message
  bool operator==(const Incorrect&) const = default;
};
struct GoldFailure {
  std::string message;
  bool operator==(const GoldFailure&) const = default;
};

using Verdict = std::variant<Correct, Incorrect, GoldFailure>;

inline bool is_correct(const Verdict& v) { return std::holds_alternative<Correct>(v); }
inline bool is_gold_failure(const Verdict& v) { return std::holds_alternative<GoldFailure>(v); }

/// Persisted digest of an ExecutionOutcome; result rows are not stored.
struct OutcomeSummary {
  std::string status;  // "ok" | "error" | "timeout"
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  double elapsed_ms = 0;
  std::optional<ErrorKind> error_kind;
  std::string message;
  std::int64_t limit_ms = 0;

  static OutcomeSummary of(const ExecutionOutcome& o);
  bool operator==(const OutcomeSummary&) const = default;
};

struct EvalRecord {
  std::int64_t example_id = 0;
  std::string model_id;
  Dialect dialect;
  std::string pred_sql;
  OutcomeSummary gold;
  OutcomeSummary pred;
  Verdict verdict;
  std::string run_id;
  bool operator==(const EvalRecord&) const = default;
};

struct EndpointInfo {
  std::string model_id;
  std::string base_url;
  std::string model;
  std::string api_key_env;  // name only, never the value
  int max_tokens = 1024;
  bool operator==(const EndpointInfo&) const = default;
};

struct RunManifest {
  std::string run_id;
  std::string benchmark_name;
  std::string benchmark_hash;  // sha256 hex of the benchmark file
  std::vector<Dialect> dialects;
  std::vector<EndpointInfo> endpoints;
  double rtol = 1e-5;
  double atol = 1e-8;
  std::int64_t timeout_ms = 30000;
  int parallelism = 8;
  std::string created_at;  // ISO-8601 UTC
  bool operator==(const RunManifest&) const = default;
};

}  // namespace poly
