#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <random>
#include <set>
#include <thread>

#include "json.hpp"
#include "poly/core/errors.hpp"
#include "poly/gapscope/gapscope.hpp"
#include "poly/migration/migration.hpp"
#include "support/fake_chat.hpp"
#include "support/migration_fixtures.hpp"

using namespace poly;
using namespace poly::gap;
using poly::testing::FakeChat;

namespace {

EvalRecord record(std::string model, std::int64_t id, Verdict v, Dialect d = Dialect::postgres()) {
  EvalRecord r;
  r.example_id = id;
  r.model_id = std::move(model);
  r.dialect = d;
  r.pred_sql = "SELECT 1";
  r.gold.status = "ok";
  r.pred.status = "ok";
  r.verdict = std::move(v);
  return r;
}

BenchmarkSpec bench(int n) {
  BenchmarkSpec b;
  b.name = "b";
  for (int i = 0; i < n; ++i) b.examples.push_back({i, "q" + std::to_string(i), "SELECT " + std::to_string(i), "db", std::nullopt});
  return b;
}

const std::string kDdl =
    "CREATE TABLE \"employees\" (\"id\" BIGINT, \"name\" TEXT, \"salary\" DOUBLE PRECISION, \"dept_id\" BIGINT, "
    "\"hired\" DATE, PRIMARY KEY (\"id\"));\n"
    "CREATE TABLE \"departments\" (\"id\" BIGINT, \"title\" TEXT);\n";

GapError make_gap(std::string pred, std::string gold = "SELECT name FROM employees WHERE salary > 1000") {
  GapError g;
  g.example_id = 7;
  g.model_id = "m";
  g.dialect = Dialect::postgres();
  g.question = "Who earns more than 1000?";
  g.pred_sql = std::move(pred);
  g.gold_sql = std::move(gold);
  g.schema_ddl = kDdl;
  g.gold.status = "ok";
  g.pred.status = "ok";
  return g;
}

GapError failing(std::string pred, std::string message, ErrorKind kind) {
  auto g = make_gap(std::move(pred));
  g.pred.status = "error";
  g.pred.error_kind = kind;
  g.pred.message = message;
  g.pred_error = message;
  return g;
}

Incorrect wrong() { return Incorrect{IncorrectReason::ResultMismatch, "differs"}; }

}  // namespace

TEST_CASE("gap extraction follows the definition") {
  auto b = bench(4);
  std::vector<EvalRecord> src = {record("m", 0, Correct{}), record("m", 1, Correct{}), record("m", 2, wrong()),
                                 record("m", 3, GoldFailure{"boom"})};
  std::vector<EvalRecord> tgt = {record("m", 0, wrong()), record("m", 1, Correct{}), record("m", 2, wrong()),
                                 record("m", 3, wrong())};
  auto gaps = extract_gap_errors(src, tgt, b, [](const std::string&) { return kDdl; });
  REQUIRE(gaps.size() == 1);
  CHECK(gaps[0].example_id == 0);
  CHECK(gaps[0].gold_sql == "SELECT 0");
  CHECK(gaps[0].schema_ddl == kDdl);
  CHECK_FALSE(gaps[0].pred_error.has_value());
  CHECK_FALSE(gaps[0].results_equal);

  // GoldFailure on the target side excludes the pair as well.
  tgt[0].verdict = GoldFailure{"down"};
  CHECK(extract_gap_errors(src, tgt, b, nullptr).empty());

  // Engine errors and timeouts carry a message.
  tgt[0] = record("m", 0, Incorrect{IncorrectReason::PredError, "syntax error"});
  tgt[0].pred.status = "error";
  tgt[0].pred.message = "syntax error at or near \"strftime\"";
  tgt[1] = record("m", 1, Incorrect{IncorrectReason::PredTimeout, ""});
  tgt[1].pred.status = "timeout";
  tgt[1].pred.limit_ms = 30000;
  gaps = extract_gap_errors(src, tgt, b, nullptr);
  REQUIRE(gaps.size() == 2);
  CHECK(gaps[0].pred_error == "syntax error at or near \"strftime\"");
  CHECK(gaps[1].pred_error == "timeout after 30000 ms");
}

TEST_CASE("gap extraction is antisymmetric") {
  std::mt19937_64 rng(99);
  auto b = bench(40);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalRecord> a, c;
    auto pick = [&]() -> Verdict {
      switch (rng() % 5) {
        case 0: return GoldFailure{"x"};
        case 1:
        case 2: return Correct{};
        default: return wrong();
      }
    };
    for (const char* m : {"m1", "m2"})
      for (int i = 0; i < 40; ++i) {
        if (rng() % 10) a.push_back(record(m, i, pick()));
        if (rng() % 10) c.push_back(record(m, i, pick()));
      }
    std::shuffle(c.begin(), c.end(), rng);
    auto fwd = extract_gap_errors(a, c, b, nullptr);
    auto rev = extract_gap_errors(c, a, b, nullptr);
    std::set<std::pair<std::string, std::int64_t>> f, r;
    for (const auto& g : fwd) f.insert({g.model_id, g.example_id});
    for (const auto& g : rev) r.insert({g.model_id, g.example_id});
    for (const auto& k : f) CHECK_FALSE(r.count(k));
    // Brute-force oracle for the forward set.
    std::set<std::pair<std::string, std::int64_t>> expect;
    for (const auto& x : a)
      for (const auto& y : c)
        if (x.model_id == y.model_id && x.example_id == y.example_id && is_correct(x.verdict) &&
            std::holds_alternative<Incorrect>(y.verdict))
          expect.insert({x.model_id, x.example_id});
    CHECK(f == expect);
    CHECK(std::is_sorted(fwd.begin(), fwd.end(), [](const GapError& x, const GapError& y) {
      return std::tie(x.model_id, x.example_id) < std::tie(y.model_id, y.example_id);
    }));
  }
}

TEST_CASE("judge prompt rendering") {
  auto tmpl = default_judge_template();
  auto g = make_gap("SELECT name FROM employees WHERE salary >= 1000");
  auto prompt = build_judge_prompt(g, tmpl);
  CHECK(prompt.find("DECISION PROCEDURE (STRICT ORDER)") != std::string::npos);
  CHECK(prompt.find("1. CHECK FOR SCHEMA REFERENCE ERRORS") != std::string::npos);
  CHECK(prompt.find("{prediction_json}") == std::string::npos);
  CHECK(prompt.find("{{") == std::string::npos);
  CHECK(prompt.find("{\n    \"question_id\": <int>,") != std::string::npos);
  auto payload = judge_payload(g);
  CHECK(prompt.find(payload.dump(2)) != std::string::npos);
  CHECK(payload["pred_error"].is_null());
  CHECK(payload["gen_type"] == "postgres");
  CHECK(payload["results_equal"] == false);
  for (const char* k : {"gen_type", "schema", "predicted_sql", "gold_sql", "question", "pred_error", "results_equal"})
    CHECK(payload.contains(k));
  CHECK(build_judge_prompt(g, tmpl) == prompt);

  CHECK_THROWS_AS(build_judge_prompt(g, "no placeholder"), TemplateError);
  CHECK_THROWS_AS(build_judge_prompt(g, "{prediction_json} {other}"), TemplateError);
  CHECK(build_judge_prompt(g, "{{x}} {prediction_json}").rfind("{x} {", 0) == 0);
}

TEST_CASE("judge output parsing") {
  auto ok = parse_judge_output(
      R"({"question_id": 7, "category": "filtering_error", "explanation": "e", "evidence": ">="})", 7);
  REQUIRE(std::holds_alternative<Classification>(ok));
  CHECK(std::get<Classification>(ok).category == ErrorCategory::Filtering);
  CHECK(std::holds_alternative<Classification>(parse_judge_output(
      "```json\n{\"question_id\": 7, \"category\": \"dialect_error\", \"explanation\": \"\", \"evidence\": \"\"}\n```", 7)));
  CHECK(std::holds_alternative<JudgeNull>(parse_judge_output("  null\n", 7)));
  for (const char* bad : {"", "nope", "[1]", R"({"question_id": 7, "category": "filtering_error", "explanation": "e"})",
                          R"({"question_id": 7, "category": "typo_error", "explanation": "e", "evidence": ""})",
                          R"({"question_id": 8, "category": "filtering_error", "explanation": "e", "evidence": ""})",
                          R"({"question_id": "7", "category": "filtering_error", "explanation": "e", "evidence": ""})",
                          R"({"question_id": 7, "category": "filtering_error", "explanation": "e", "evidence": "", "x": 1})"}) {
    CAPTURE(bad);
    CHECK(std::holds_alternative<Malformed>(parse_judge_output(bad, 7)));
  }
}

TEST_CASE("rule judge categories") {
  RuleJudge judge;
  CHECK(judge.classify(make_gap("SELECT name FROM employees WHERE salaryy > 1000")).category == ErrorCategory::SchemaLinking);
  CHECK(judge.classify(make_gap("SELECT name FROM employees WHERE salaryy > 1000")).evidence == "salaryy");
  CHECK(judge.classify(make_gap("SELECT e.name FROM staff e")).category == ErrorCategory::SchemaLinking);
  CHECK(judge.classify(make_gap("SELECT e.nam FROM employees e")).category == ErrorCategory::SchemaLinking);
  CHECK(judge.classify(failing("SELECT nme FROM employees", "column \"nme\" does not exist", ErrorKind::Semantic))
            .category == ErrorCategory::SchemaLinking);

  auto dialect = failing("SELECT name FROM employees WHERE strftime('%Y', hired) = '2020'",
                         "function strftime(unknown, date) does not exist", ErrorKind::Syntax);
  CHECK(judge.classify(dialect).category == ErrorCategory::Dialect);

  CHECK(judge.classify(make_gap("SELECT name FROM employees WHERE salary > 2000")).category == ErrorCategory::Filtering);
  CHECK(judge.classify(make_gap("SELECT name FROM employees WHERE salary >= 1000")).category == ErrorCategory::Filtering);

  auto agg = make_gap("SELECT dept_id, SUM(salary) FROM employees WHERE salary > 0 GROUP BY dept_id",
                 "SELECT dept_id, AVG(salary) FROM employees WHERE salary > 0 GROUP BY dept_id");
  CHECK(judge.classify(agg).category == ErrorCategory::Aggregation);
  auto grp = make_gap("SELECT d.title, COUNT(*) FROM employees e JOIN departments d ON d.id = e.dept_id GROUP BY d.id, d.title",
                 "SELECT d.title, COUNT(*) FROM employees e JOIN departments d ON d.id = e.dept_id GROUP BY d.title");
  CHECK(judge.classify(grp).category == ErrorCategory::Aggregation);
  auto strict = failing("SELECT dept_id, name FROM employees GROUP BY dept_id",
                        "column \"employees.name\" must appear in the GROUP BY clause or be used in an aggregate function",
                        ErrorKind::Semantic);
  CHECK(judge.classify(strict).category == ErrorCategory::Aggregation);

  auto slow = make_gap("SELECT * FROM employees a, employees b");
  slow.pred.status = "timeout";
  CHECK(judge.classify(slow).category == ErrorCategory::InvalidEvaluation);

  // The reply goes through the same parser as a model judge.
  auto reply = judge.respond(dialect, "");
  auto parsed = parse_judge_output(reply, dialect.example_id);
  REQUIRE(std::holds_alternative<Classification>(parsed));
  CHECK(std::get<Classification>(parsed).category == ErrorCategory::Dialect);
}

TEST_CASE("rule judge accepts well-formed references") {
  RuleJudge judge;
  for (const char* sql : {
           "SELECT e.name AS who, d.title FROM employees AS e JOIN departments d ON d.id = e.dept_id",
           "WITH top AS (SELECT id, salary FROM employees) SELECT t.salary FROM top t",
           "SELECT \"name\" FROM \"employees\" WHERE EXTRACT(YEAR FROM hired) = 2020",
           "SELECT name, salary * 2 doubled FROM employees ORDER BY doubled DESC LIMIT 3",
           "SELECT COUNT(*) FROM employees, departments WHERE employees.dept_id = departments.id",
           "SELECT x.n FROM (SELECT name AS n FROM employees) x",
           "SELECT CAST(salary AS INTEGER) FROM public.employees WHERE hired > DATE '2020-01-01' - INTERVAL '1' DAY",
       }) {
    std::string text = sql;
    CAPTURE(text);
    CHECK(judge.classify(make_gap(sql)).category != ErrorCategory::SchemaLinking);
  }
}

TEST_CASE("rule judge finds no phantom references in hand-written queries") {
  poly::testing::MiniBenchmark mini;
  RuleJudge judge;
  auto mapping = migration::TypeMappingTable::defaults();
  for (std::size_t i = 0; i < mini.spec.examples.size(); ++i) {
    const auto& ex = mini.spec.examples[i];
    auto path = mini.spec.db_registry.at(ex.db_id);
    auto snap = migration::infer_logical_types(path, migration::introspect_schema(path));
    auto g = make_gap(mini.postgres[i], ex.gold_sql);
    g.schema_ddl = migration::render_target_ddl(snap, Dialect::postgres(), mapping, migration::DdlMode::Prompt);
    CAPTURE(mini.postgres[i]);
    CHECK(judge.classify(g).category != ErrorCategory::SchemaLinking);
  }
}

TEST_CASE("rule judge is deterministic") {
  std::mt19937_64 rng(5);
  const char* preds[] = {"SELECT name FROM employees WHERE salary > 5", "SELECT nope FROM employees",
                         "SELECT dept_id, COUNT(*) FROM employees GROUP BY dept_id", "SELEC 1"};
  RuleJudge a, b;
  for (int i = 0; i < 200; ++i) {
    auto g = make_gap(preds[rng() % 4]);
    if (rng() % 3 == 0) {
      g.pred.status = "error";
      g.pred.error_kind = static_cast<ErrorKind>(rng() % 5);
      g.pred_error = "error " + std::to_string(rng() % 3);
    }
    CHECK(a.classify(g) == b.classify(g));
    CHECK(a.respond(g, "") == a.respond(g, ""));
  }
}

namespace {

// Scripted judge: replies in turn from a per-gap queue.
struct ScriptedJudge : Judge {
  std::function<std::string(const GapError&, int)> script;
  std::mutex mu;
  std::map<std::int64_t, int> calls;
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};

  std::string name() const override { return "scripted"; }
  std::string respond(const GapError& g, const std::string& prompt) override {
    REQUIRE(prompt.find("\"question_id\": " + std::to_string(g.example_id)) != std::string::npos);
    int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2 + g.example_id % 5));
    int n;
    {
      std::lock_guard lk(mu);
      n = calls[g.example_id]++;
    }
    --in_flight;
    return script(g, n);
  }
};

std::string valid(std::int64_t id, const char* cat = "filtering_error") {
  return nlohmann::json{{"question_id", id}, {"category", cat}, {"explanation", "x"}, {"evidence", "y"}}.dump();
}

std::vector<GapError> many(int n) {
  std::vector<GapError> out;
  for (int i = 0; i < n; ++i) {
    auto g = make_gap("SELECT 1");
    g.example_id = i;
    out.push_back(g);
  }
  return out;
}

}  // namespace

TEST_CASE("classification retries malformed output and keeps input order") {
  ScriptedJudge judge;
  judge.script = [](const GapError& g, int call) {
    if (g.example_id % 3 == 0) return std::string("garbage");        // never parses
    if (g.example_id % 3 == 1 && call == 0) return std::string("null");  // parses on retry
    return valid(g.example_id, "aggregation_error");
  };
  auto gaps = many(24);
  auto out = classify_gap_errors(gaps, judge, {.retries = 2, .max_in_flight = 4});
  REQUIRE(out.size() == gaps.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i].question_id == gaps[i].example_id);
    CHECK(out[i].judge == "scripted");
    if (i % 3 == 0) {
      CHECK(out[i].category == ErrorCategory::InvalidEvaluation);
      CHECK(out[i].explanation == "unparseable judge output");
      CHECK(judge.calls[static_cast<std::int64_t>(i)] == 3);
    } else {
      CHECK(out[i].category == ErrorCategory::Aggregation);
    }
  }
  CHECK(judge.peak.load() <= 4);
  CHECK(judge.peak.load() >= 2);
}

TEST_CASE("unreachable judge lists unclassified gaps") {
  ScriptedJudge judge;
  judge.script = [](const GapError& g, int) -> std::string {
    if (g.example_id == 2 || g.example_id == 5) throw adapters::ChatError("connection refused", 0, true);
    return valid(g.example_id);
  };
  try {
    classify_gap_errors(many(6), judge);
    FAIL("expected JudgeUnavailable");
  } catch (const JudgeUnavailable& e) {
    CHECK(e.unclassified == std::vector<std::int64_t>{2, 5});
    CHECK(e.classified.size() == 4);
    CHECK(std::string(e.what()).find("2, 5") != std::string::npos);
  }
}

TEST_CASE("http judge speaks chat completion at temperature zero") {
  std::atomic<int> failures_left{1};
  FakeChat server([&](const nlohmann::json& req, httplib::Response& res) {
    if (failures_left-- > 0) {
      res.status = 503;
      return;
    }
    auto system = req.at("messages").at(0).at("content").get<std::string>();
    auto at = system.rfind("\"question_id\": ");
    auto id = std::stoll(system.substr(at + 15));
    FakeChat::reply(res, valid(id, "schema_linking_error"));
  });
  ::setenv("POLY_TEST_JUDGE_KEY", "sekret", 1);
  EndpointInfo ep{"judge-1", server.base_url(), "oss-judge", "POLY_TEST_JUDGE_KEY", 256};
  HttpJudge judge(adapters::ChatClient(ep, 5000, {3, std::chrono::milliseconds(1)}));
  auto out = classify_gap_errors(many(3), judge, {.retries = 0, .max_in_flight = 1});
  REQUIRE(out.size() == 3);
  CHECK(out[2].category == ErrorCategory::SchemaLinking);
  CHECK(out[0].judge == "judge-1");
  REQUIRE(server.request_count() == 4);
  const auto& req = server.requests.back();
  CHECK(req.at("temperature") == 0);
  CHECK(req.at("model") == "oss-judge");
  CHECK(req.at("max_tokens") == 256);
  CHECK(server.auth_headers.back() == "Bearer sekret");
}

TEST_CASE("chat client error handling") {
  FakeChat server([](const nlohmann::json&, httplib::Response& res) { res.status = 401; });
  EndpointInfo ep{"m", server.base_url(), "", "", 64};
  adapters::ChatClient client(ep, 5000, {3, std::chrono::milliseconds(1)});
  try {
    client.complete({.system = "", .user = "hi", .json_object = false});
    FAIL("expected ChatError");
  } catch (const adapters::ChatError& e) {
    CHECK(e.status() == 401);
    CHECK_FALSE(e.transient());
    CHECK(std::string(e.what()).find("authentication") != std::string::npos);
  }
  CHECK(server.request_count() == 1);  // not retried

  EndpointInfo missing_key{"m", server.base_url(), "", "POLY_TEST_UNSET_KEY_VAR", 64};
  ::unsetenv("POLY_TEST_UNSET_KEY_VAR");
  CHECK_THROWS_AS(adapters::ChatClient{missing_key}, ConfigError);
  EndpointInfo ftp{"m", "ftp://x", "", "", 64};
  CHECK_THROWS_AS(adapters::ChatClient{ftp}, ConfigError);

  EndpointInfo dead{"m", "http://127.0.0.1:1/v1", "", "", 64};
  adapters::ChatClient unreachable(dead, 500, {2, std::chrono::milliseconds(1)});
  try {
    unreachable.complete({.system = "", .user = "hi", .json_object = false});
    FAIL("expected ChatError");
  } catch (const adapters::ChatError& e) {
    CHECK(e.transient());
    CHECK(e.status() == 0);
  }
}

TEST_CASE("category distribution") {
  std::vector<Classification> cs;
  for (int i = 0; i < 100; ++i) {
    Classification c;
    c.category = i < 61 ? ErrorCategory::Filtering : static_cast<ErrorCategory>(i % 5 == 1 ? 0 : i % 5);
    cs.push_back(c);
  }
  auto d = category_distribution(cs);
  CHECK(d.total == 100);
  CHECK(d.percent.at(ErrorCategory::Filtering) >= 61.0);
  CHECK_THROWS_AS(category_distribution(std::vector<Classification>{}), ConfigError);

  std::vector<Classification> exact(61);
  for (auto& c : exact) c.category = ErrorCategory::Filtering;
  for (int i = 0; i < 39; ++i) {
    Classification c;
    c.category = ErrorCategory::Dialect;
    exact.push_back(c);
  }
  CHECK(category_distribution(exact).percent.at(ErrorCategory::Filtering) == doctest::Approx(61.0));
  CHECK(category_distribution(exact).percent.at(ErrorCategory::SchemaLinking) == 0.0);
}

TEST_CASE("category shares from published counts") {
  auto j = nlohmann::json::parse(poly::testing::slurp(poly::testing::fixture_path("gap_category_counts.json")));
  std::map<ErrorCategory, std::int64_t> counts;
  for (auto c : kAllCategories) counts[c] = j.at(to_string(c)).get<std::int64_t>();
  auto d = category_distribution(counts);
  double sum = 0;
  for (auto c : kAllCategories) {
    CAPTURE(to_string(c));
    double shown = round_half_even(d.percent.at(c), 1);
    CHECK(shown == doctest::Approx(j.at("published_percent").at(to_string(c)).get<double>()).epsilon(1e-12));
    sum += shown;
  }
  CHECK(std::abs(sum - 100.0) <= 0.2);
  CHECK(std::abs(d.determinate.at(ErrorCategory::Filtering) - 68.8) <= 0.1);
  // Independent route: renormalize the published shares themselves.
  double pub = j.at("published_percent").at("filtering_error").get<double>() /
               (100.0 - j.at("published_percent").at("invalid_evaluation").get<double>()) * 100.0;
  CHECK(std::abs(pub - 68.8) <= 0.1);
}

TEST_CASE("half-even rounding") {
  CHECK(round_half_even(0.25, 1) == doctest::Approx(0.2));
  CHECK(round_half_even(0.35, 1) == doctest::Approx(0.4));
  CHECK(round_half_even(2.5, 0) == 2.0);
  CHECK(round_half_even(3.5, 0) == 4.0);
  CHECK(round_half_even(61.183, 1) == doctest::Approx(61.2));
}

TEST_CASE("classification JSON round-trips") {
  RuleJudge judge;
  auto c = judge.classify(make_gap("SELECT nope FROM employees"));
  CHECK(nlohmann::json(c).get<Classification>() == c);
  auto g = failing("SELECT 1", "bad", ErrorKind::Syntax);
  CHECK(nlohmann::json(g).get<GapError>() == g);
}
