#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "poly/adapters/chat.hpp"
#include "poly/core/benchmark.hpp"
#include "poly/core/records.hpp"

namespace poly::gap {

enum class ErrorCategory : std::uint8_t { SchemaLinking, Filtering, Aggregation, Dialect, InvalidEvaluation };

inline constexpr ErrorCategory kAllCategories[] = {ErrorCategory::SchemaLinking, ErrorCategory::Filtering,
                                                   ErrorCategory::Aggregation, ErrorCategory::Dialect,
                                                   ErrorCategory::InvalidEvaluation};

// Judge protocol names, e.g. "filtering_error".
const char* to_string(ErrorCategory c);
ErrorCategory parse_error_category(std::string_view text);  // throws ParseError

/// A (model, example) pair that is Correct on the source dialect and
/// Incorrect on the target.
struct GapError {
  std::int64_t example_id = 0;
  std::string model_id;
  Dialect dialect;
  std::string question;
  std::string pred_sql;
  std::string gold_sql;
  std::string schema_ddl;  // target dialect, prompt mode
  std::optional<std::string> pred_error;
  OutcomeSummary gold;
  OutcomeSummary pred;
  bool results_equal = false;
  bool operator==(const GapError&) const = default;
};

struct Classification {
  std::int64_t question_id = 0;
  ErrorCategory category = ErrorCategory::InvalidEvaluation;
  std::string explanation;
  std::string evidence;
  // Provenance of the row in gap_classifications.jsonl; not judge output.
  std::string model_id;
  Dialect dialect;
  std::string judge;
  bool operator==(const Classification&) const = default;
};

void to_json(nlohmann::json& j, const GapError& g);
void from_json(const nlohmann::json& j, GapError& g);
void to_json(nlohmann::json& j, const Classification& c);
void from_json(const nlohmann::json& j, Classification& c);

/// Renders prompt-mode DDL for a database id in the target dialect.
using SchemaLookup = std::function<std::string(const std::string& db_id)>;

/// Pairs target records with source records on (model, example). Records
/// whose example is unknown to `benchmark` are skipped. Output is ordered
/// by (model, example id).
std::vector<GapError> extract_gap_errors(const std::vector<EvalRecord>& source, const std::vector<EvalRecord>& target,
                                         const BenchmarkSpec& benchmark, const SchemaLookup& schema_for);

/// The judge protocol template shipped with the harness.
std::string default_judge_template();
std::string load_judge_template(const std::filesystem::path& file);

/// Fills `{prediction_json}`; `{{`/`}}` are literal braces. Throws
/// TemplateError when the placeholder is absent or another field appears.
std::string build_judge_prompt(const GapError& gap, const std::string& tmpl);

/// The JSON object handed to the judge.
nlohmann::json judge_payload(const GapError& gap);

/// Outcome of parsing one judge reply.
struct JudgeNull {};
struct Malformed {
  std::string reason;
};
using ParsedJudgeOutput = std::variant<Classification, JudgeNull, Malformed>;

/// Accepts a JSON object with exactly question_id/category/explanation/
/// evidence (optionally inside one fenced block) or the literal null.
ParsedJudgeOutput parse_judge_output(std::string_view text, std::int64_t expected_id);

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string name() const = 0;
  /// Raw judge reply. Throws adapters::ChatError when the judge cannot be reached.
  virtual std::string respond(const GapError& gap, const std::string& prompt) = 0;
};

/// Deterministic fallback. Replies in the same JSON shape as a model judge.
class RuleJudge : public Judge {
 public:
  std::string name() const override { return "rules"; }
  std::string respond(const GapError& gap, const std::string& prompt) override;
  Classification classify(const GapError& gap) const;
};

class HttpJudge : public Judge {
 public:
  explicit HttpJudge(adapters::ChatClient client) : client_(std::move(client)) {}
  std::string name() const override { return client_.endpoint().model_id; }
  std::string respond(const GapError& gap, const std::string& prompt) override;

 private:
  adapters::ChatClient client_;
};

struct ClassifyOptions {
  int retries = 2;        // extra attempts after a malformed reply
  int max_in_flight = 4;
  std::string judge_template = default_judge_template();
};

/// Thrown when the judge stays unreachable; carries everything that did
/// get classified.
class JudgeUnavailable : public RunError {
 public:
  JudgeUnavailable(const std::string& msg, std::vector<Classification> done, std::vector<std::int64_t> missing)
      : RunError(msg), classified(std::move(done)), unclassified(std::move(missing)) {}
  std::vector<Classification> classified;
  std::vector<std::int64_t> unclassified;
};

/// One Classification per gap, in input order.
std::vector<Classification> classify_gap_errors(const std::vector<GapError>& gaps, Judge& judge,
                                                const ClassifyOptions& options = {});

struct CategoryDistribution {
  std::int64_t total = 0;
  std::map<ErrorCategory, std::int64_t> counts;   // every category present, zero allowed
  std::map<ErrorCategory, double> percent;        // of all classifications
  std::map<ErrorCategory, double> determinate;    // excluding invalid_evaluation; empty when none remain
};

/// Throws ConfigError on empty input.
CategoryDistribution category_distribution(const std::vector<Classification>& classifications);
CategoryDistribution category_distribution(const std::map<ErrorCategory, std::int64_t>& counts);

/// Round half to even at `digits` decimals.
double round_half_even(double value, int digits);

}  // namespace poly::gap
