#include <doctest.h>
#include <fmt/format.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "poly/core/codec.hpp"
#include "poly/core/errors.hpp"
#include "poly/harness/pipeline.hpp"
#include "poly/harness/prompt.hpp"
#include "poly/harness/report.hpp"
#include "poly/metrics/metrics.hpp"
#include "support/fake_chat.hpp"
#include "support/migration_fixtures.hpp"

using namespace poly;
using namespace poly::harness;
using nlohmann::json;
using poly::testing::FakeChat;
using poly::testing::TempDir;
namespace fs = std::filesystem;

namespace {

std::string question_of(const json& request) {
  auto user = request.at("messages").at(1).at("content").get<std::string>();
  auto start = user.find("Question: ") + 10;
  return user.substr(start, user.find('\n', start) - start);
}

// Mini benchmark, a run root and a quirk target directory.
struct Bed {
  poly::testing::MiniBenchmark mini;
  TempDir work;
  HarnessConfig cfg;

  Bed() {
    cfg.runs_root = work.path() / "runs";
    cfg.dsn_env["quirk"] = "POLY_TEST_QUIRK_DSN";
    cfg.parallelism = 4;
    setenv("POLY_TEST_QUIRK_DSN", ("quirk:" + (work.path() / "targets").string()).c_str(), 1);
    setenv("POLY_TEST_KEY", "test-token", 1);
  }

  RunManifest manifest(const std::string& id) const {
    RunManifest m;
    m.run_id = id;
    m.benchmark_hash = sha256_hex(poly::testing::slurp(poly::testing::fixture_path("mini/benchmark.json")));
    m.rtol = cfg.rtol;
    m.atol = cfg.atol;
    m.timeout_ms = cfg.timeout_ms;
    return m;
  }
  RunDirectory create(const std::string& id) const { return RunDirectory::create(cfg.runs_root, manifest(id), mini.spec); }

  static EndpointInfo endpoint(const FakeChat& chat, const std::string& id = "m1") {
    return {.model_id = id, .base_url = chat.base_url(), .model = id, .api_key_env = "POLY_TEST_KEY", .max_tokens = 256};
  }

  // Question -> completion text for every example, from SQL by example index.
  std::map<std::string, std::string> completions(const std::vector<std::string>& sql) const {
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < sql.size(); ++i)
      out[mini.spec.examples[i].question] = "Here you go:\n```sql\n" + sql[i] + ";\n```";
    return out;
  }
  std::vector<std::string> gold() const {
    std::vector<std::string> out;
    for (const auto& e : mini.spec.examples) out.push_back(e.gold_sql);
    return out;
  }
  std::vector<std::string> with_wrong() const {
    auto sql = gold();
    for (const auto& w : poly::testing::wrong_sqlite()) sql[w.example] = w.sql;
    return sql;
  }
};

FakeChat::Handler answering(const std::map<std::string, std::string>& answers) {
  return [&answers](const json& req, httplib::Response& res) { FakeChat::reply(res, answers.at(question_of(req))); };
}

GenerateOptions fast_retry(int parallelism = 4) {
  GenerateOptions o;
  o.parallelism = parallelism;
  o.retry = {.attempts = 3, .base_delay = std::chrono::milliseconds(1)};
  return o;
}

std::set<std::tuple<std::string, std::string, std::int64_t, std::string>> prediction_set(const RunDirectory& run) {
  std::set<std::tuple<std::string, std::string, std::int64_t, std::string>> out;
  for (const auto& p : run.predictions()) out.emplace(p.model_id, p.dialect.id(), p.example_id, p.sql);
  return out;
}

// Verdict content without timings.
std::multiset<std::string> verdict_digest(const std::vector<EvalRecord>& records) {
  std::multiset<std::string> out;
  for (const auto& r : records)
    out.insert(fmt::format("{}|{}|{}|{}|{}:{}x{}|{}:{}x{}", r.model_id, r.dialect.id(), r.example_id,
                           json(r.verdict).dump(), r.gold.status, r.gold.rows, r.gold.cols, r.pred.status,
                           r.pred.rows, r.pred.cols));
  return out;
}

void truncate_to(const fs::path& file, std::uintmax_t size) { fs::resize_file(file, size); }

std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"')
        cur += text[++i];
      else if (c == '"')
        quoted = false;
      else
        cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      row.push_back(std::move(cur));
      cur.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      cur += c;
    }
  }
  return rows;
}

EvalRecord record(const std::string& model, const Dialect& d, std::int64_t id, bool correct) {
  EvalRecord r;
  r.model_id = model;
  r.dialect = d;
  r.example_id = id;
  r.verdict = correct ? Verdict{Correct{}} : Verdict{Incorrect{IncorrectReason::ResultMismatch, "rows differ"}};
  return r;
}

}  // namespace

TEST_CASE("shipped guidelines have five entries for every built-in dialect") {
  for (const auto& d : Dialect::builtin()) {
    CAPTURE(d.id());
    auto g = load_guidelines(d, default_data_dir());
    for (const auto& item : g.items) CHECK_FALSE(item.empty());
  }
  CHECK_FALSE(load_prompt_header(default_data_dir()).empty());
}

TEST_CASE("guideline files must hold exactly five entries") {
  CHECK_THROWS_AS(parse_guidelines(Dialect::postgres(), "# v1\na\nb\nc\nd\n"), ConfigError);
  CHECK_THROWS_AS(parse_guidelines(Dialect::postgres(), "a\nb\nc\nd\ne\nf\n"), ConfigError);
  auto g = parse_guidelines(Dialect::postgres(), "# header\n a \n\nb\nc\n# note\nd\ne\n");
  CHECK(g.items == std::array<std::string, 5>{"a", "b", "c", "d", "e"});
  TempDir empty;
  CHECK_THROWS_AS(load_guidelines(Dialect::parse("duckdb"), empty.path()), ConfigError);
}

TEST_CASE("prompt carries guidelines, schema and evidence") {
  auto guidelines = load_guidelines(Dialect::postgres(), default_data_dir());
  auto header = load_prompt_header(default_data_dir());
  Example ex{.id = 4, .question = "How many orders are paid?", .gold_sql = "", .db_id = "shop", .evidence = {}};
  std::string ddl = "CREATE TABLE \"orders\" (\"id\" BIGINT);\n";

  auto p = build_prompt(ex, ddl, guidelines, header);
  for (const auto& g : guidelines.items) CHECK(p.system.find(g) != std::string::npos);
  CHECK(p.system.find(ddl) != std::string::npos);
  CHECK(p.system.find("PostgreSQL") != std::string::npos);
  CHECK(p.system.find("{dialect}") == std::string::npos);
  CHECK(p.user.find("Question: How many orders are paid?") != std::string::npos);
  CHECK(p.user.find("Evidence:") == std::string::npos);
  CHECK(p.user.find("single PostgreSQL SQL query") != std::string::npos);

  ex.evidence = "paid = 1 means the order was settled";
  auto q = build_prompt(ex, ddl, guidelines, header);
  CHECK(q.user.find("Evidence: paid = 1 means the order was settled") != std::string::npos);
  CHECK(q == build_prompt(ex, ddl, guidelines, header));
}

TEST_CASE("sql extraction") {
  CHECK(extract_sql("```sql\nSELECT 1;\n```") == "SELECT 1");
  CHECK(extract_sql("Sure! SELECT a FROM t") == "SELECT a FROM t");
  CHECK_THROWS_AS(extract_sql("I cannot answer"), ExtractionError);
  CHECK(extract_sql("```\nSELECT 2\n```") == "SELECT 2");
  CHECK(extract_sql("```postgresql\nWITH x AS (SELECT 1) SELECT * FROM x;;\n```\nmore ```SELECT 3```") ==
        "WITH x AS (SELECT 1) SELECT * FROM x");
  CHECK(extract_sql("```SELECT 4```") == "SELECT 4");
  CHECK(extract_sql("the selection is: select name from t ;  ") == "select name from t");
  CHECK(extract_sql("withdrawn? WITH a AS (SELECT 1) SELECT * FROM a") == "WITH a AS (SELECT 1) SELECT * FROM a");
  CHECK_THROWS_AS(extract_sql("```sql\n\n```"), ExtractionError);
  CHECK_THROWS_AS(extract_sql(""), ExtractionError);
}

TEST_CASE("sql extraction recovers the query from decorated completions") {
  const std::vector<std::string> queries = {
      "SELECT name FROM customers WHERE city = 'Oslo'",
      "WITH t AS (SELECT id FROM orders) SELECT COUNT(*) FROM t",
      "SELECT a,\n       b\nFROM x\nORDER BY a DESC",
      "select strftime('%Y', joined) from customers",
  };
  const std::vector<std::string> prefixes = {"", "Sure.\n", "Here is the query for the question:\n\n", "  "};
  const std::vector<std::string> tags = {"", "sql", "SQL", "postgresql"};
  const std::vector<std::string> endings = {"", ";", ";;", "; \n", "\n"};
  std::mt19937 rng(7);
  for (int i = 0; i < 400; ++i) {
    const auto& q = queries[rng() % queries.size()];
    const auto& pre = prefixes[rng() % prefixes.size()];
    const auto& end = endings[rng() % endings.size()];
    std::string text;
    if (rng() % 2) {
      text = pre + "```" + tags[rng() % tags.size()] + "\n" + q + end + "\n```\nLet me know if that helps.";
    } else {
      text = pre + q + end;
    }
    CAPTURE(text);
    CHECK(extract_sql(text) == q);
  }
}

TEST_CASE("config parsing and DSN resolution") {
  auto c = parse_config(json::parse(R"({
    "endpoints": [{"model_id": "m1", "base_url": "http://localhost:1/v1", "api_key_env": "K"}],
    "dsn_env": {"postgres": "MY_PG"},
    "comparator": {"rtol": 1e-4},
    "timeout_ms": 5000, "parallelism": 2
  })"));
  CHECK(c.endpoint("m1").model == "m1");
  CHECK(c.endpoint("m1").max_tokens == 1024);
  CHECK(c.rtol == 1e-4);
  CHECK(c.atol == 1e-8);
  CHECK(c.timeout_ms == 5000);
  CHECK(c.comparator().rtol == 1e-4);
  CHECK_THROWS_AS(c.endpoint("m2"), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"timeout": 5})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"parallelism": "many"})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"endpoints": [{"model_id": "x"}]})")), ConfigError);
  CHECK_THROWS_AS(parse_config(json::parse(R"({"endpoints": [{"model_id": "x", "base_url": "u", "key": "s"}]})")),
                  ConfigError);

  unsetenv("MY_PG");
  try {
    resolve_dsn(Dialect::postgres(), c);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("MY_PG") != std::string::npos);
  }
  setenv("MY_PG", "postgresql://u@h/db", 1);
  CHECK(resolve_dsn(Dialect::postgres(), c) == "postgresql://u@h/db");
  setenv("POLY_MYSQL_DSN", "mysql://u@h/db", 1);
  CHECK(resolve_dsn(Dialect::mysql(), c) == "mysql://u@h/db");
  unsetenv("POLY_MYSQL_DSN");
}

TEST_CASE("sha256 of known inputs") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("json-lines writer drops a torn final line") {
  TempDir dir;
  auto file = dir.path() / "x.jsonl";
  {
    JsonlWriter w(file);
    w.append({{"a", 1}});
    w.append({{"a", 2}});
  }
  {
    std::ofstream out(file, std::ios::app);
    out << "{\"a\": 3";  // interrupted write
  }
  CHECK(read_jsonl(file).size() == 2);
  {
    JsonlWriter w(file);
    w.append({{"a", 4}});
  }
  auto lines = read_jsonl(file);
  REQUIRE(lines.size() == 3);
  CHECK(lines[2]["a"] == 4);
  {
    std::ofstream out(file, std::ios::app);
    out << "garbage\n{\"a\": 5}\n";
  }
  CHECK_THROWS_AS(read_jsonl(file), ParseError);
  CHECK(read_jsonl(dir.path() / "missing.jsonl").empty());
}

TEST_CASE("a run is created once and freezes its comparison settings") {
  Bed bed;
  auto run = bed.create("r1");
  CHECK(fs::exists(run.manifest_file()));
  CHECK(fs::exists(run.benchmark_file()));
  CHECK_THROWS_AS(bed.create("r1"), RunError);
  CHECK_THROWS_AS(RunDirectory::open(bed.cfg.runs_root, "nope"), RunError);

  auto again = RunDirectory::open(bed.cfg.runs_root, "r1");
  CHECK(again.manifest() == run.manifest());
  CHECK(again.benchmark() == bed.mini.spec);
  CHECK(RunDirectory::open_ref("/nonexistent", run.path().string()).manifest() == run.manifest());

  auto req = bed.manifest("r1");
  CHECK_NOTHROW(again.check_compatible(req));
  req.rtol = 1e-3;
  CHECK_THROWS_AS(again.check_compatible(req), ConfigError);
  req = bed.manifest("r1");
  req.benchmark_hash = "00";
  CHECK_THROWS_AS(again.check_compatible(req), ConfigError);

  EndpointInfo e{.model_id = "m", .base_url = "http://x/v1", .model = "m", .api_key_env = "K", .max_tokens = 10};
  again.add_endpoint(e);
  again.add_endpoint(e);
  CHECK(RunDirectory::open(bed.cfg.runs_root, "r1").manifest().endpoints.size() == 1);
  e.max_tokens = 20;
  CHECK_THROWS_AS(again.add_endpoint(e), ConfigError);

  // No secret ever reaches the run directory.
  auto text = poly::testing::slurp(run.manifest_file().string());
  CHECK(text.find("test-token") == std::string::npos);
}

TEST_CASE("generation persists one prediction per example and resumes") {
  Bed bed;
  auto run = bed.create("gen");
  migrate_run(run, Dialect::quirk(), bed.cfg);
  auto answers = bed.completions(bed.gold());
  FakeChat chat(answering(answers));

  auto s = generate_predictions(run, Dialect::quirk(), Bed::endpoint(chat), bed.cfg, fast_retry());
  CHECK(s.complete);
  CHECK(s.written == 12);
  CHECK(chat.request_count() == 12);
  auto preds = run.predictions();
  REQUIRE(preds.size() == 12);
  for (const auto& p : preds) {
    const auto* ex = bed.mini.spec.find(p.example_id);
    REQUIRE(ex);
    CHECK(p.sql == ex->gold_sql);
    CHECK(p.raw_completion.find("```sql") != std::string::npos);
    CHECK_FALSE(p.extraction_error);
  }
  for (const auto& req : chat.requests) {
    CHECK(req.at("temperature") == 0);
    CHECK(req.at("max_tokens") == 256);
    CHECK(req.at("messages").at(0).at("role") == "system");
    CHECK(req.at("messages").at(0).at("content").get<std::string>().find("CREATE TABLE") != std::string::npos);
  }
  CHECK(chat.auth_headers.front() == "Bearer test-token");
  CHECK(run.status()["generation"]["m1/quirk"]["complete"] == true);

  // Keep four predictions, as if the process died after them.
  auto lines = read_jsonl(run.predictions_file());
  fs::remove(run.predictions_file());
  {
    JsonlWriter w(run.predictions_file());
    for (int i = 0; i < 4; ++i) w.append(lines[static_cast<std::size_t>(i)]);
  }
  auto before = chat.request_count();
  auto r = generate_predictions(run, Dialect::quirk(), Bed::endpoint(chat), bed.cfg, fast_retry());
  CHECK(r.existing == 4);
  CHECK(r.requested == 8);
  CHECK(chat.request_count() - before == 8);
  CHECK(run.predictions().size() == 12);

  auto t = generate_predictions(run, Dialect::quirk(), Bed::endpoint(chat), bed.cfg, fast_retry());
  CHECK(t.requested == 0);
  CHECK(t.complete);
}

TEST_CASE("generation stops on rejected credentials") {
  Bed bed;
  auto run = bed.create("auth");
  FakeChat chat([](const json&, httplib::Response& res) {
    res.status = 401;
    res.set_content(R"({"error":"bad key"})", "application/json");
  });
  auto s = generate_predictions(run, Dialect::sqlite(), Bed::endpoint(chat), bed.cfg, fast_retry(1));
  CHECK_FALSE(s.complete);
  CHECK(s.written == 0);
  CHECK(chat.request_count() == 1);
  CHECK(s.message.find("authentication rejected") != std::string::npos);
  CHECK(s.message.find("POLY_TEST_KEY") != std::string::npos);
  CHECK(run.predictions().empty());
  auto st = run.status()["generation"]["m1/sqlite"];
  CHECK(st["complete"] == false);
  CHECK(st["error"].get<std::string>().find("401") != std::string::npos);

  unsetenv("POLY_TEST_KEY");
  CHECK_THROWS_AS(generate_predictions(run, Dialect::sqlite(), Bed::endpoint(chat), bed.cfg, fast_retry(1)),
                  ConfigError);
}

TEST_CASE("generation against a failing endpoint keeps partial results") {
  Bed bed;
  auto run = bed.create("flaky");
  auto answers = bed.completions(bed.gold());
  const auto broken = bed.mini.spec.examples[3].question;
  FakeChat chat([&](const json& req, httplib::Response& res) {
    if (question_of(req) == broken) {
      res.status = 503;
      return;
    }
    FakeChat::reply(res, answers.at(question_of(req)));
  });
  auto s = generate_predictions(run, Dialect::sqlite(), Bed::endpoint(chat), bed.cfg, fast_retry());
  CHECK_FALSE(s.complete);
  CHECK(s.failed == 1);
  CHECK(s.written == 11);
  CHECK(chat.request_count() == 11 + 3);  // three attempts for the broken one
  CHECK(run.predictions().size() == 11);
  CHECK(run.status()["generation"]["m1/sqlite"]["complete"] == false);
}

TEST_CASE("completions without SQL become extraction failures") {
  Bed bed;
  auto run = bed.create("noext");
  FakeChat chat([](const json&, httplib::Response& res) { FakeChat::reply(res, "I cannot answer that."); });
  auto s = generate_predictions(run, Dialect::sqlite(), Bed::endpoint(chat), bed.cfg, fast_retry());
  CHECK(s.complete);
  auto preds = run.predictions();
  REQUIRE(preds.size() == 12);
  for (const auto& p : preds) CHECK(p.extraction_error);

  run_evaluation(run, Dialect::sqlite(), bed.cfg);
  auto v = run.verdicts();
  REQUIRE(v.size() == 12);
  for (const auto& r : v) {
    auto* inc = std::get_if<Incorrect>(&r.verdict);
    REQUIRE(inc);
    CHECK(inc->reason == IncorrectReason::PredError);
  }
}

TEST_CASE("interrupted generation converges to the uninterrupted state") {
  Bed bed;
  auto answers = bed.completions(bed.gold());
  FakeChat chat(answering(answers));
  auto full = bed.create("full");
  generate_predictions(full, Dialect::sqlite(), Bed::endpoint(chat), bed.cfg, fast_retry());
  auto expected = prediction_set(full);
  REQUIRE(expected.size() == 12);

  auto run = bed.create("cut");
  generate_predictions(run, Dialect::sqlite(), Bed::endpoint(chat), bed.cfg, fast_retry());
  auto size = fs::file_size(run.predictions_file());
  std::mt19937 rng(11);
  for (int i = 0; i < 6; ++i) {
    auto cut = std::uniform_int_distribution<std::uintmax_t>(0, size)(rng);
    CAPTURE(cut);
    truncate_to(run.predictions_file(), cut);
    auto s = generate_predictions(run, Dialect::sqlite(), Bed::endpoint(chat), bed.cfg, fast_retry());
    CHECK(s.complete);
    CHECK(prediction_set(run) == expected);
    CHECK(run.predictions().size() == 12);
    size = fs::file_size(run.predictions_file());
  }
}

TEST_CASE("evaluation of correct and wrong target queries") {
  Bed bed;
  auto run = bed.create("eval");
  auto mig = migrate_run(run, Dialect::quirk(), bed.cfg);
  REQUIRE(mig.all_verified());
  CHECK(fs::exists(run.migration_report(Dialect::quirk(), "shop")));

  auto good = bed.completions(bed.gold());
  FakeChat chat_good(answering(good));
  generate_predictions(run, Dialect::quirk(), Bed::endpoint(chat_good, "right"), bed.cfg, fast_retry());
  auto wrong = bed.completions(bed.with_wrong());
  FakeChat chat_wrong(answering(wrong));
  generate_predictions(run, Dialect::quirk(), Bed::endpoint(chat_wrong, "wrong"), bed.cfg, fast_retry());

  auto s = run_evaluation(run, Dialect::quirk(), bed.cfg);
  CHECK(s.evaluated == 24);
  CHECK(s.errors == 0);
  std::map<std::string, int> correct;
  for (const auto& r : run.verdicts()) {
    CHECK(r.run_id == "eval");
    if (is_correct(r.verdict)) ++correct[r.model_id];
  }
  CHECK(correct["right"] == 12);
  CHECK(correct["wrong"] == 6);
  for (const auto& r : run.verdicts()) {
    bool planted = false;
    for (const auto& w : poly::testing::wrong_sqlite()) planted |= r.example_id == static_cast<std::int64_t>(w.example);
    if (r.model_id == "wrong") CHECK(is_correct(r.verdict) == !planted);
  }

  // Re-running finds nothing left to do.
  auto again = run_evaluation(run, Dialect::quirk(), bed.cfg);
  CHECK(again.evaluated == 0);
  CHECK(again.existing == 24);
}

TEST_CASE("evaluation refuses databases that are not migrated") {
  Bed bed;
  auto run = bed.create("unmigrated");
  auto good = bed.completions(bed.gold());
  FakeChat chat(answering(good));
  // Predictions written by hand: generation would refuse too.
  {
    JsonlWriter w(run.predictions_file());
    for (const auto& ex : bed.mini.spec.examples)
      w.append(json(Prediction{ex.id, "m1", Dialect::quirk(), ex.gold_sql, "", 0, std::nullopt}));
  }
  try {
    run_evaluation(run, Dialect::quirk(), bed.cfg);
    FAIL("expected a refusal");
  } catch (const RunError& e) {
    std::string msg = e.what();
    CHECK((msg.find("shop") != std::string::npos || msg.find("library") != std::string::npos));
    CHECK(msg.find("not migrated") != std::string::npos);
  }
  CHECK(run.verdicts().empty());
  CHECK_THROWS_AS(generate_predictions(run, Dialect::quirk(), Bed::endpoint(chat, "m2"), bed.cfg, fast_retry()),
                  RunError);

  // A report that failed verification is refused as well.
  migrate_run(run, Dialect::quirk(), bed.cfg);
  auto report = migration::read_report(run.migration_report(Dialect::quirk(), "library"));
  report.tables.front().target_rows += 1;
  migration::write_report(run.migration_report(Dialect::quirk(), "library"), report);
  try {
    run_evaluation(run, Dialect::quirk(), bed.cfg);
    FAIL("expected a refusal");
  } catch (const RunError& e) {
    CHECK(std::string(e.what()).find("library") != std::string::npos);
  }
}

TEST_CASE("unknown example ids become error entries and the run continues") {
  Bed bed;
  auto run = bed.create("ghost");
  {
    JsonlWriter w(run.predictions_file());
    for (const auto& ex : bed.mini.spec.examples)
      w.append(json(Prediction{ex.id, "m1", Dialect::sqlite(), ex.gold_sql, "", 0, std::nullopt}));
    w.append(json(Prediction{999, "m1", Dialect::sqlite(), "SELECT 1", "", 0, std::nullopt}));
  }
  auto s = run_evaluation(run, Dialect::sqlite(), bed.cfg);
  CHECK(s.errors == 1);
  CHECK(s.evaluated == 12);
  CHECK(s.correct == 12);
  auto failures = run.eval_failures();
  REQUIRE(failures.size() == 1);
  CHECK(failures[0].example_id == 999);
  CHECK(failures[0].message.find("999") != std::string::npos);
  CHECK(run.verdicts().size() == 12);
  CHECK(run_evaluation(run, Dialect::sqlite(), bed.cfg).errors == 0);
}

TEST_CASE("verdicts do not depend on parallelism and survive interruption") {
  Bed bed;
  auto run = bed.create("determinism");
  migrate_run(run, Dialect::quirk(), bed.cfg);
  auto answers = bed.completions(bed.with_wrong());
  FakeChat chat(answering(answers));
  for (const char* m : {"a", "b", "c"})
    generate_predictions(run, Dialect::quirk(), Bed::endpoint(chat, m), bed.cfg, fast_retry());

  run_evaluation(run, Dialect::quirk(), bed.cfg, std::nullopt, 1);
  auto serial = verdict_digest(run.verdicts());
  REQUIRE(serial.size() == 36);
  for (int width : {2, 8}) {
    fs::remove(run.verdicts_file());
    run_evaluation(run, Dialect::quirk(), bed.cfg, std::nullopt, width);
    CHECK(verdict_digest(run.verdicts()) == serial);
  }

  auto size = fs::file_size(run.verdicts_file());
  std::mt19937 rng(5);
  for (int i = 0; i < 4; ++i) {
    auto cut = std::uniform_int_distribution<std::uintmax_t>(0, size)(rng);
    CAPTURE(cut);
    truncate_to(run.verdicts_file(), cut);
    run_evaluation(run, Dialect::quirk(), bed.cfg, std::nullopt, 4);
    CHECK(verdict_digest(run.verdicts()) == serial);
    size = fs::file_size(run.verdicts_file());
  }

  // One model at a time covers the same ground.
  fs::remove(run.verdicts_file());
  for (const char* m : {"c", "a", "b"}) run_evaluation(run, Dialect::quirk(), bed.cfg, std::string(m), 3);
  CHECK(verdict_digest(run.verdicts()) == serial);
}

TEST_CASE("report accuracies equal execution accuracy recomputed from verdicts") {
  Bed bed;
  auto run = bed.create("report");
  migrate_run(run, Dialect::quirk(), bed.cfg);
  auto good = bed.completions(bed.gold());
  auto bad = bed.completions(bed.with_wrong());
  // "fragile" answers the migrated target wrongly; its guidelines give it away.
  FakeChat chat([&](const json& req, httplib::Response& res) {
    auto system = req.at("messages").at(0).at("content").get<std::string>();
    bool target = system.find("boolean columns hold 0 and 1") != std::string::npos;
    bool fragile = req.at("model") == "fragile";
    FakeChat::reply(res, (fragile && target ? bad : good).at(question_of(req)));
  });
  for (const auto& d : {Dialect::sqlite(), Dialect::quirk()}) {
    generate_predictions(run, d, Bed::endpoint(chat, "steady"), bed.cfg, fast_retry());
    generate_predictions(run, d, Bed::endpoint(chat, "fragile"), bed.cfg, fast_retry());
    run_evaluation(run, d, bed.cfg);
  }
  auto rendered = write_report(run);
  CHECK(fs::exists(run.report_md()));
  CHECK(fs::exists(run.report_csv()));
  CHECK(poly::testing::slurp(run.report_csv().string()) == rendered.csv);

  // Independent route: raw JSON lines, grouped by hand.
  std::map<std::pair<std::string, std::string>, std::vector<EvalRecord>> groups;
  for (const auto& j : read_jsonl(run.verdicts_file())) {
    auto r = j.get<EvalRecord>();
    groups[{r.model_id, r.dialect.id()}].push_back(r);
  }
  auto rows = read_csv(rendered.csv);
  REQUIRE(rows.size() == 3);
  const auto& header = rows[0];
  REQUIRE(header.size() == 5);
  CHECK(header[1] == "sqlite");
  CHECK(header[2] == "quirk");
  std::size_t cells = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (std::size_t c = 1; c <= 2; ++c) {
      auto recomputed = metrics::execution_accuracy(groups.at({rows[i][0], header[c]}));
      CHECK(std::stod(rows[i][c]) == recomputed);
      ++cells;
    }
  }
  CHECK(cells == 4);
  CHECK(rendered.markdown.find("| fragile | 100.0 | 50.0 | 75.0 |") != std::string::npos);
  CHECK(rendered.markdown.find("| fragile | 100.0 | 50.0 | 50.0 | 0.5000 |") != std::string::npos);
  CHECK(rendered.markdown.find("Robustness omitted") == std::string::npos);
  CHECK(rendered.markdown.find("## Gap errors") == std::string::npos);
  CHECK(rendered.markdown.find("| Run | report |") != std::string::npos);

  // Classifying the run adds the distribution section.
  gap::RuleJudge judge;
  auto cs = classify_run(run, judge, {});
  CHECK(cs.gaps == 6);
  CHECK(cs.classified == 6);
  auto cls = read_classifications(run);
  REQUIRE(cls.size() == 6);
  for (const auto& c : cls) {
    CHECK(c.model_id == "fragile");
    CHECK(c.dialect == Dialect::quirk());
    CHECK(c.judge == "rules");
  }
  CHECK(classify_run(run, judge, {}).classified == 0);
  auto with_gaps = write_report(run);
  CHECK(with_gaps.markdown.find("## Gap errors") != std::string::npos);
  CHECK(with_gaps.markdown.find("6 classified gap errors") != std::string::npos);
  for (auto c : gap::kAllCategories) CHECK(with_gaps.markdown.find(std::string("| ") + gap::to_string(c) + " |") != std::string::npos);
}

TEST_CASE("single model, single dialect report omits robustness with a notice") {
  std::vector<EvalRecord> recs = {record("m", Dialect::postgres(), 0, true), record("m", Dialect::postgres(), 1, false)};
  auto r = render_report({metrics::accuracy_matrix(recs), Dialect::sqlite(), std::nullopt, std::nullopt});
  CHECK(r.markdown.find("| m | 50.0 | 50.0 |") != std::string::npos);
  CHECK(r.markdown.find("Robustness omitted: the grid has no sqlite baseline column") != std::string::npos);
  auto rows = read_csv(r.csv);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1] == std::vector<std::string>{"m", "50", "50", ""});

  std::vector<EvalRecord> base = {record("m", Dialect::sqlite(), 0, true)};
  auto b = render_report({metrics::accuracy_matrix(base), Dialect::sqlite(), std::nullopt, std::nullopt});
  CHECK(b.markdown.find("Robustness omitted: the grid has no target dialect besides the baseline") != std::string::npos);
}

TEST_CASE("published leaderboard grid reproduces its averages in the report") {
  auto board = poly::testing::read_leaderboard();
  REQUIRE(board.size() == 16);
  std::vector<Dialect> dialects = {Dialect::sqlite(), Dialect::postgres(), Dialect::mysql(),
                                   Dialect::snowflake(), Dialect::bigquery(), Dialect::clickhouse()};
  std::vector<std::string> models;
  std::vector<std::vector<std::optional<double>>> cells;
  for (const auto& row : board) {
    models.push_back(row.model);
    std::vector<std::optional<double>> r;
    for (double v : row.values()) r.push_back(v);
    cells.push_back(r);
  }
  auto rendered = render_report({metrics::AccuracyMatrix(models, dialects, cells), Dialect::sqlite(), std::nullopt,
                                 std::nullopt});
  auto rows = read_csv(rendered.csv);
  REQUIRE(rows.size() == 17);
  CHECK(rows[0][7] == "avg");
  std::map<std::string, std::vector<std::string>> by_model;
  for (std::size_t i = 1; i < rows.size(); ++i) by_model[rows[i][0]] = rows[i];
  for (const auto& row : board) {
    CAPTURE(row.model);
    REQUIRE(by_model.count(row.model));
    double avg = std::stod(by_model[row.model][7]);
    int sum = 0;
    for (int t : row.tenths) sum += t;
    // Rendered mean against an integer-exact oracle, then the published value
    // within +/-0.05 in exact tenths.
    CHECK(std::abs(avg - sum / 60.0) < 1e-9);
    CHECK(std::abs(sum - 6 * row.avg_tenths) <= 3);
  }
  CHECK(rendered.markdown.find("| GPT-OSS-120B | 54.8 | 42.1 | 43.3 | 41.3 | 40.5 | 40.9 | 43.8 |") != std::string::npos);
  // Robustness column carries the per-model scores.
  CHECK(std::abs(std::stod(by_model["Claude 3.5 Sonnet"][8]) - 0.7594) <= 0.0005);
}

TEST_CASE("agreement of a verdict set with itself is perfect") {
  std::vector<EvalRecord> a;
  std::mt19937 rng(3);
  for (const char* m : {"m1", "m2", "m3", "m4"}) {
    int p = static_cast<int>(rng() % 60) + 20;
    for (int i = 0; i < 50; ++i) a.push_back(record(m, Dialect::postgres(), i, static_cast<int>(rng() % 100) < p));
  }
  auto rows = agreement_report(a, a);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label == "postgres");
  CHECK(rows[0].kappa == doctest::Approx(1.0));
  CHECK(rows[0].spearman == doctest::Approx(1.0));
  CHECK(rows[0].pearson == doctest::Approx(1.0));
  CHECK(rows[0].coverage == doctest::Approx(1.0));
  CHECK(rows[0].pairs == 200);
  CHECK(rows[0].models == 4);
}

TEST_CASE("proxy agreement rows render the published table verbatim") {
  auto text = poly::testing::slurp(poly::testing::fixture_path("proxy_agreement.csv"));
  auto csv = read_csv(text);
  std::vector<AgreementRow> rows;
  for (std::size_t i = 1; i < csv.size(); ++i) {
    AgreementRow r;
    r.label = csv[i][0];
    r.kappa = std::stod(csv[i][1]);
    r.spearman = std::stod(csv[i][2]);
    r.pearson = std::stod(csv[i][3]);
    rows.push_back(r);
  }
  REQUIRE(rows.size() == 5);
  auto out = render_agreement(rows);
  CHECK(out.markdown.find("| snowflake | 0.31 | 0.49 | 0.58 |\n") != std::string::npos);
  for (std::size_t i = 1; i < csv.size(); ++i) {
    auto line = fmt::format("| {} | {} | {} | {} |\n", csv[i][0], csv[i][1], csv[i][2], csv[i][3]);
    CAPTURE(line);
    CHECK(out.markdown.find(line) != std::string::npos);
  }
  auto back = read_csv(out.csv);
  REQUIRE(back.size() == 6);
  for (std::size_t i = 1; i < csv.size(); ++i) {
    CHECK(back[i][0] == csv[i][0]);
    for (std::size_t c = 1; c < 4; ++c) CHECK(std::stod(back[i][c]) == std::stod(csv[i][c]));
  }
}

TEST_CASE("independent verdicts with matched marginals have near-zero kappa") {
  std::mt19937_64 rng(2024);
  std::bernoulli_distribution flip(0.4);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<EvalRecord> a, b;
    for (int m = 0; m < 4; ++m)
      for (int i = 0; i < 2500; ++i) {
        auto model = "m" + std::to_string(m);
        a.push_back(record(model, Dialect::sqlite(), i, flip(rng)));
        b.push_back(record(model, Dialect::mysql(), i, flip(rng)));
      }
    auto rows = agreement_report(a, b);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].label == "mysql");
    // Standard error of kappa under independence is about 1/sqrt(n) = 0.01.
    CHECK(std::abs(*rows[0].kappa) < 0.05);
  }
}

TEST_CASE("agreement over disjoint grids is an error") {
  std::vector<EvalRecord> a = {record("m1", Dialect::postgres(), 0, true), record("m1", Dialect::postgres(), 1, false)};
  std::vector<EvalRecord> b = {record("m2", Dialect::postgres(), 0, true)};
  CHECK_THROWS_AS(agreement_report(a, b), Error);
  std::vector<EvalRecord> c = {record("m1", Dialect::mysql(), 0, true)};
  std::vector<EvalRecord> d = {record("m1", Dialect::postgres(), 0, true), record("m1", Dialect::clickhouse(), 0, true)};
  CHECK_THROWS_AS(agreement_report(d, c), Error);

  // Partial overlap reports coverage against the reference.
  std::vector<EvalRecord> ref = {record("m1", Dialect::postgres(), 0, true), record("m1", Dialect::postgres(), 1, true),
                                 record("m1", Dialect::postgres(), 2, false), record("m1", Dialect::postgres(), 3, false)};
  std::vector<EvalRecord> part = {record("m1", Dialect::postgres(), 0, true), record("m1", Dialect::postgres(), 2, false)};
  auto rows = agreement_report(part, ref);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].coverage == doctest::Approx(0.5));
  CHECK(rows[0].kappa == doctest::Approx(1.0));
  CHECK_FALSE(rows[0].spearman);
  auto out = render_agreement(rows);
  CHECK(out.markdown.find("| postgres | 1.00 | - | - | 50.0% |") != std::string::npos);
}

TEST_CASE("external transpiler contract") {
  TempDir dir;
  auto script = [&](const std::string& name, const std::string& body) {
    auto path = dir.path() / name;
    std::ofstream(path) << "#!/bin/sh\n" << body << "\n";
    fs::permissions(path, fs::perms::owner_all);
    return path.string();
  };
  // Identity plugin. Plain `cat` would reject the --from/--to flags.
  auto identity = script("identity.sh", "exec cat");
  auto r = transpile_external("SELECT 1", Dialect::postgres(), Dialect::sqlite(), identity);
  CHECK(r.ok);
  CHECK(r.sql == "SELECT 1");

  auto args = script("args.sh", "cat >/dev/null; echo \"$@\"");
  auto a = transpile_external("SELECT 1", Dialect::postgres(), Dialect::sqlite(), args);
  CHECK(a.sql == "--from postgres --to sqlite");

  auto fails = script("fail.sh", "echo 'cannot parse' >&2; exit 1");
  auto f = transpile_external("SELECT 1", Dialect::postgres(), Dialect::sqlite(), fails);
  CHECK_FALSE(f.ok);
  CHECK(f.error.find("status 1") != std::string::npos);
  CHECK(f.error.find("cannot parse") != std::string::npos);

  auto empty = script("empty.sh", "cat >/dev/null; exit 0");
  auto e = transpile_external("SELECT 1", Dialect::postgres(), Dialect::sqlite(), empty);
  CHECK_FALSE(e.ok);
  CHECK(e.error.find("no output") != std::string::npos);

  // A plugin that never reads its input.
  auto deaf = script("deaf.sh", "echo SELECT 2");
  auto d = transpile_external(std::string(1 << 20, 'x'), Dialect::postgres(), Dialect::sqlite(), deaf);
  CHECK(d.ok);
  CHECK(d.sql == "SELECT 2");

  CHECK_THROWS_AS(transpile_external("SELECT 1", Dialect::postgres(), Dialect::sqlite(), "no-such-plugin-xyz"),
                  ConfigError);
  CHECK_THROWS_AS(transpile_external("SELECT 1", Dialect::postgres(), Dialect::sqlite(), (dir.path() / "nope").string()),
                  ConfigError);
  CHECK_THROWS_AS(transpile_external("SELECT 1", Dialect::postgres(), Dialect::sqlite(), ""), ConfigError);
  auto quoted = script("my plugin.sh", "cat");
  CHECK(transpile_external("SELECT 5", Dialect::postgres(), Dialect::sqlite(), "'" + quoted + "'").sql == "SELECT 5");
}

TEST_CASE("failed transpilations reduce coverage") {
  Bed bed;
  auto run = bed.create("transpile");
  {
    JsonlWriter w(run.predictions_file());
    for (const auto& ex : bed.mini.spec.examples)
      w.append(json(Prediction{ex.id, "m1", Dialect::postgres(), ex.gold_sql, "", 0, std::nullopt}));
  }
  TempDir dir;
  auto plugin = dir.path() / "picky.sh";
  // Rejects queries mentioning julianday or strftime.
  std::ofstream(plugin) << "#!/bin/sh\nsql=$(cat)\ncase \"$sql\" in *julianday*|*strftime*) exit 2;; esac\n"
                           "printf '%s\\n' \"$sql\"\n";
  fs::permissions(plugin, fs::perms::owner_all);

  auto s = transpile_predictions(run, Dialect::postgres(), Dialect::sqlite(), plugin.string());
  CHECK(s.total == 12);
  CHECK(s.transpiled == 10);
  CHECK(s.coverage() == doctest::Approx(10.0 / 12.0));
  std::size_t moved = 0;
  for (const auto& p : run.predictions())
    if (p.model_id == "m1@postgres") {
      CHECK(p.dialect == Dialect::sqlite());
      ++moved;
    }
  CHECK(moved == 10);
  auto again = transpile_predictions(run, Dialect::postgres(), Dialect::sqlite(), plugin.string());
  CHECK(again.existing == 10);
  CHECK(run.predictions().size() == 22);

  run_evaluation(run, Dialect::sqlite(), bed.cfg);
  auto v = run.verdicts();
  CHECK(v.size() == 10);
  for (const auto& r : v) CHECK(is_correct(r.verdict));
}
