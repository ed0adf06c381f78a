#include "poly/gapscope/gapscope.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <set>
#include <tuple>

#include "poly/core/codec.hpp"
#include "poly/core/text.hpp"

namespace poly::gap {

const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::SchemaLinking: return "schema_linking_error";
    case ErrorCategory::Filtering: return "filtering_error";
    case ErrorCategory::Aggregation: return "aggregation_error";
    case ErrorCategory::Dialect: return "dialect_error";
    case ErrorCategory::InvalidEvaluation: return "invalid_evaluation";
  }
  return "?";
}

ErrorCategory parse_error_category(std::string_view s) {
  for (auto c : kAllCategories)
    if (s == to_string(c)) return c;
  throw ParseError("unknown error category '" + std::string(s) + "'");
}

void to_json(nlohmann::json& j, const GapError& g) {
  j = {{"example_id", g.example_id}, {"model_id", g.model_id}, {"dialect", g.dialect},
       {"question", g.question},     {"pred_sql", g.pred_sql},   {"gold_sql", g.gold_sql},
       {"schema_ddl", g.schema_ddl}, {"gold", g.gold},           {"pred", g.pred},
       {"results_equal", g.results_equal}};
  j["pred_error"] = g.pred_error ? nlohmann::json(*g.pred_error) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, GapError& g) {
  g.example_id = j.at("example_id").get<std::int64_t>();
  g.model_id = j.at("model_id").get<std::string>();
  g.dialect = j.at("dialect").get<Dialect>();
  g.question = j.at("question").get<std::string>();
  g.pred_sql = j.at("pred_sql").get<std::string>();
  g.gold_sql = j.at("gold_sql").get<std::string>();
  g.schema_ddl = j.at("schema_ddl").get<std::string>();
  g.gold = j.at("gold").get<OutcomeSummary>();
  g.pred = j.at("pred").get<OutcomeSummary>();
  g.results_equal = j.at("results_equal").get<bool>();
  g.pred_error = j.at("pred_error").is_null() ? std::nullopt : std::optional(j.at("pred_error").get<std::string>());
}

void to_json(nlohmann::json& j, const Classification& c) {
  j = {{"question_id", c.question_id}, {"category", to_string(c.category)}, {"explanation", c.explanation},
       {"evidence", c.evidence},       {"model_id", c.model_id},             {"dialect", c.dialect},
       {"judge", c.judge}};
}

void from_json(const nlohmann::json& j, Classification& c) {
  c.question_id = j.at("question_id").get<std::int64_t>();
  c.category = parse_error_category(j.at("category").get<std::string>());
  c.explanation = j.at("explanation").get<std::string>();
  c.evidence = j.at("evidence").get<std::string>();
  c.model_id = j.value("model_id", "");
  c.dialect = j.contains("dialect") ? j.at("dialect").get<Dialect>() : Dialect{};
  c.judge = j.value("judge", "");
}

std::vector<GapError> extract_gap_errors(const std::vector<EvalRecord>& source, const std::vector<EvalRecord>& target,
                                         const BenchmarkSpec& benchmark, const SchemaLookup& schema_for) {
  std::map<std::pair<std::string, std::int64_t>, const EvalRecord*> by_key;
  for (const auto& r : source) by_key[{r.model_id, r.example_id}] = &r;
  std::map<std::string, std::string> ddl_cache;
  std::vector<GapError> out;
  for (const auto& t : target) {
    auto it = by_key.find({t.model_id, t.example_id});
    if (it == by_key.end()) continue;
    const auto& s = *it->second;
    if (!is_correct(s.verdict) || !std::holds_alternative<Incorrect>(t.verdict)) continue;
    const Example* ex = benchmark.find(t.example_id);
    if (!ex) continue;
    GapError g;
    g.example_id = t.example_id;
    g.model_id = t.model_id;
    g.dialect = t.dialect;
    g.question = ex->question;
    g.pred_sql = t.pred_sql;
    g.gold_sql = ex->gold_sql;
    auto cached = ddl_cache.find(ex->db_id);
    if (cached == ddl_cache.end()) cached = ddl_cache.emplace(ex->db_id, schema_for ? schema_for(ex->db_id) : "").first;
    g.schema_ddl = cached->second;
    g.gold = t.gold;
    g.pred = t.pred;
    if (t.pred.status == "timeout") {
      g.pred_error = fmt::format("timeout after {} ms", t.pred.limit_ms);
    } else if (t.pred.status != "ok") {
      const auto& inc = std::get<Incorrect>(t.verdict);
      g.pred_error = t.pred.message.empty() ? inc.detail : t.pred.message;
    }
    out.push_back(std::move(g));
  }
  std::sort(out.begin(), out.end(), [](const GapError& a, const GapError& b) {
    return std::tie(a.model_id, a.example_id, a.dialect) < std::tie(b.model_id, b.example_id, b.dialect);
  });
  return out;
}

std::string load_judge_template(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read judge template " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string default_judge_template() {
  std::filesystem::path dir = POLY_DATA_DIR;
  if (const char* env = std::getenv("POLY_DATA_DIR"); env && *env) dir = env;
  return load_judge_template(dir / "judge_template.txt");
}

nlohmann::json judge_payload(const GapError& g) {
  return {{"question_id", g.example_id},
          {"gen_type", g.dialect.id()},
          {"schema", g.schema_ddl},
          {"predicted_sql", g.pred_sql},
          {"gold_sql", g.gold_sql},
          {"question", g.question},
          {"pred_error", g.pred_error ? nlohmann::json(*g.pred_error) : nlohmann::json(nullptr)},
          {"results_equal", g.results_equal}};
}

std::string build_judge_prompt(const GapError& gap, const std::string& tmpl) {
  static constexpr std::string_view kField = "{prediction_json}";
  std::string out;
  bool placed = false;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, 2, "{{") == 0 || tmpl.compare(i, 2, "}}") == 0) {
      out.push_back(tmpl[i]);
      i += 2;
    } else if (tmpl.compare(i, kField.size(), kField) == 0) {
      out += judge_payload(gap).dump(2);
      placed = true;
      i += kField.size();
    } else if (tmpl[i] == '{' || tmpl[i] == '}') {
      auto end = tmpl.find('}', i);
      throw TemplateError("judge template has an unknown field " +
                          tmpl.substr(i, end == std::string::npos ? 20 : end - i + 1));
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  if (!placed) throw TemplateError("judge template lacks the {prediction_json} placeholder");
  return out;
}

ParsedJudgeOutput parse_judge_output(std::string_view raw, std::int64_t expected_id) {
  std::string body(text::trim(raw));
  if (body.rfind("```", 0) == 0) {
    auto nl = body.find('\n');
    auto close = body.rfind("```");
    if (nl == std::string::npos || close <= nl) return Malformed{"unterminated code fence"};
    body = std::string(text::trim(std::string_view(body).substr(nl + 1, close - nl - 1)));
  }
  if (body == "null") return JudgeNull{};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return Malformed{"not JSON"};
  }
  if (!j.is_object()) return Malformed{"not a JSON object"};
  static const std::set<std::string> keys = {"question_id", "category", "explanation", "evidence"};
  if (j.size() != keys.size()) return Malformed{"expected exactly question_id, category, explanation, evidence"};
  for (const auto& [k, _] : j.items())
    if (!keys.count(k)) return Malformed{"unexpected key " + k};
  if (!j["question_id"].is_number_integer()) return Malformed{"question_id is not an integer"};
  if (!j["category"].is_string() || !j["explanation"].is_string() || !j["evidence"].is_string())
    return Malformed{"category, explanation and evidence must be strings"};
  Classification c;
  c.question_id = j["question_id"].get<std::int64_t>();
  if (c.question_id != expected_id) return Malformed{fmt::format("question_id {} != {}", c.question_id, expected_id)};
  try {
    c.category = parse_error_category(j["category"].get<std::string>());
  } catch (const ParseError& e) {
    return Malformed{e.what()};
  }
  c.explanation = j["explanation"].get<std::string>();
  c.evidence = j["evidence"].get<std::string>();
  return c;
}

std::string HttpJudge::respond(const GapError&, const std::string& prompt) {
  return client_
      .complete({.system = prompt,
                 .user = "Classify the prediction data above. Reply with the JSON object, or null.",
                 .json_object = false})
      .content;
}

std::vector<Classification> classify_gap_errors(const std::vector<GapError>& gaps, Judge& judge,
                                                const ClassifyOptions& options) {
  if (options.retries < 0) throw ConfigError("retries must be non-negative");
  if (options.max_in_flight < 1) throw ConfigError("max_in_flight must be positive");
  std::vector<std::string> prompts;
  prompts.reserve(gaps.size());
  for (const auto& g : gaps) prompts.push_back(build_judge_prompt(g, options.judge_template));

  std::vector<std::optional<Classification>> results(gaps.size());
  std::vector<std::string> failures(gaps.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < gaps.size();) {
      const auto& g = gaps[i];
      std::string last;
      try {
        for (int attempt = 0; attempt <= options.retries && !results[i]; ++attempt) {
          last = judge.respond(g, prompts[i]);
          auto parsed = parse_judge_output(last, g.example_id);
          if (auto* c = std::get_if<Classification>(&parsed)) results[i] = *c;
        }
        if (!results[i]) {
          Classification c;
          c.question_id = g.example_id;
          c.category = ErrorCategory::InvalidEvaluation;
          c.explanation = "unparseable judge output";
          c.evidence = last.substr(0, 200);
          results[i] = c;
        }
        results[i]->model_id = g.model_id;
        results[i]->dialect = g.dialect;
        results[i]->judge = judge.name();
      } catch (const adapters::ChatError& e) {
        failures[i] = e.what();
      }
    }
  };
  auto n = static_cast<std::size_t>(std::min<std::size_t>(options.max_in_flight, std::max<std::size_t>(1, gaps.size())));
  std::vector<std::thread> threads;
  for (std::size_t i = 1; i < n; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  std::vector<Classification> done;
  std::vector<std::int64_t> missing;
  std::string first_failure;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (results[i]) {
      done.push_back(*results[i]);
    } else {
      missing.push_back(gaps[i].example_id);
      if (first_failure.empty()) first_failure = failures[i];
    }
  }
  if (!missing.empty()) {
    auto msg = fmt::format("judge {} unavailable; unclassified gap ids: {} ({})", judge.name(),
                           fmt::join(missing, ", "), first_failure);
    throw JudgeUnavailable(msg, std::move(done), std::move(missing));
  }
  return done;
}

double round_half_even(double value, int digits) {
  double scale = std::pow(10.0, digits);
  double x = value * scale;
  double fl = std::floor(x);
  double diff = x - fl;
  double r;
  if (std::abs(diff - 0.5) < 1e-9)
    r = std::fmod(fl, 2.0) == 0 ? fl : fl + 1;
  else
    r = std::round(x);
  return r / scale;
}

CategoryDistribution category_distribution(const std::map<ErrorCategory, std::int64_t>& counts) {
  CategoryDistribution d;
  for (auto c : kAllCategories) {
    auto it = counts.find(c);
    std::int64_t n = it == counts.end() ? 0 : it->second;
    if (n < 0) throw ConfigError("negative category count");
    d.counts[c] = n;
    d.total += n;
  }
  if (d.total == 0) throw ConfigError("category distribution of an empty classification set");
  for (auto [c, n] : d.counts) d.percent[c] = 100.0 * static_cast<double>(n) / static_cast<double>(d.total);
  std::int64_t determinate = d.total - d.counts[ErrorCategory::InvalidEvaluation];
  if (determinate > 0)
    for (auto [c, n] : d.counts)
      if (c != ErrorCategory::InvalidEvaluation)
        d.determinate[c] = 100.0 * static_cast<double>(n) / static_cast<double>(determinate);
  return d;
}

CategoryDistribution category_distribution(const std::vector<Classification>& classifications) {
  std::map<ErrorCategory, std::int64_t> counts;
  for (const auto& c : classifications) ++counts[c.category];
  return category_distribution(counts);
}

}  // namespace poly::gap
