#include <doctest.h>

#include <chrono>
#include <cstdlib>

#include "poly/adapters/pool.hpp"
#include "poly/adapters/postgres.hpp"
#include "poly/core/errors.hpp"

using namespace poly;
using namespace poly::adapters;
using Clock = std::chrono::steady_clock;

namespace {

std::string dsn() {
  const char* v = std::getenv("POLY_POSTGRES_DSN");
  REQUIRE_MESSAGE(v, "POLY_POSTGRES_DSN is not set");
  return v;
}

ResultSet rows_of(const ExecutionOutcome& o) {
  REQUIRE_MESSAGE(is_ok(o), (std::holds_alternative<EngineErrorOutcome>(o) ? std::get<EngineErrorOutcome>(o).message
                                                                            : std::string("timeout")));
  return std::get<OkOutcome>(o).result;
}

}  // namespace

TEST_CASE("postgres text decoding") {
  CHECK(decode_postgres_value(1700, "1.50") == Cell::decimal(Decimal::parse("1.50")));
  CHECK(decode_postgres_value(1700, "1.50").as_decimal().scale() == 2);
  CHECK(decode_postgres_value(16, "t") == Cell::boolean(true));
  CHECK(decode_postgres_value(17, "\\x00ff") == Cell::bytes(std::string("\x00\xff", 2)));
  CHECK(decode_postgres_value(20, "-9223372036854775808") == Cell::integer(INT64_MIN));
  CHECK(std::isinf(decode_postgres_value(701, "-Infinity").as_float()));
  CHECK(decode_postgres_value(1184, "2021-01-05 12:00:00+02") ==
        Cell::timestamp(*parse_iso_timestamp("2021-01-05T10:00:00Z")));
  CHECK(decode_postgres_value(1114, "2021-01-05 10:00:00.5") ==
        Cell::timestamp(*parse_iso_timestamp("2021-01-05T10:00:00.5Z")));
  CHECK(decode_postgres_value(2950, "a0eebc99-9c0b-4ef8-bb6d-6bb9bd380a11").kind() == CellKind::Text);
  CHECK_THROWS_AS(decode_postgres_value(1082, "infinity"), DecodeError);
  CHECK(classify_sqlstate("42601", "syntax error") == ErrorKind::Syntax);
  CHECK(classify_sqlstate("42883", "function foo(integer) does not exist") == ErrorKind::Syntax);
  CHECK(classify_sqlstate("42883", "operator does not exist: text + integer") == ErrorKind::Semantic);
  CHECK(classify_sqlstate("42P01", "relation does not exist") == ErrorKind::Semantic);
  CHECK(classify_sqlstate("23505", "dup") == ErrorKind::Constraint);
  CHECK(classify_sqlstate("08006", "gone") == ErrorKind::Connection);
}

TEST_CASE("postgres execution against a live server") {
  auto pool = connect(Dialect::postgres(), dsn(), 2, {.read_only = true});
  CHECK(rows_of(pool->execute("SELECT 1")) == ResultSet({"?column?"}, {{Cell::integer(1)}}));
  auto rs = rows_of(pool->execute(
      "SELECT NUMERIC '1.50' AS n, DATE '2021-01-05' AS d, TIMESTAMPTZ '2021-01-05 12:00:00+02' AS tz, "
      "TRUE AS b, 'x'::varchar AS s, NULL::int AS z, 2.5::float8 AS f, '\\x01'::bytea AS raw, 'NaN'::float8 AS nan"));
  CHECK(rs.at(0, 0) == Cell::decimal(Decimal::parse("1.50")));
  CHECK(rs.at(0, 1) == Cell::date(Date::from_ymd(2021, 1, 5)));
  CHECK(rs.at(0, 2) == Cell::timestamp(*parse_iso_timestamp("2021-01-05T10:00:00Z")));
  CHECK(rs.at(0, 3) == Cell::boolean(true));
  CHECK(rs.at(0, 4) == Cell::text("x"));
  CHECK(rs.at(0, 5).is_null());
  CHECK(rs.at(0, 6) == Cell::floating(2.5));
  CHECK(rs.at(0, 7) == Cell::bytes("\x01"));
  CHECK(std::isnan(rs.at(0, 8).as_float()));

  auto err = [&](const char* sql) { return std::get<EngineErrorOutcome>(pool->execute(sql)); };
  CHECK(err("SELEC 1").kind == ErrorKind::Syntax);
  CHECK(err("SELECT * FROM missing_table").kind == ErrorKind::Semantic);
  CHECK(err("SELECT no_such_fn(1)").kind == ErrorKind::Syntax);
  CHECK(err("SELECT 1; SELECT 2").kind == ErrorKind::Syntax);
  CHECK(err("CREATE TABLE nope (a int)").message.find("read-only") != std::string::npos);
  CHECK(err("SELECT DATE 'infinity'").message.find("column 'date'") != std::string::npos);

  auto start = Clock::now();
  auto outcome = pool->execute(
      "SELECT COUNT(*) FROM generate_series(1, 1000000) a CROSS JOIN generate_series(1, 1000000) b", 10);
  CHECK(std::holds_alternative<TimeoutOutcome>(outcome));
  CHECK(Clock::now() - start < std::chrono::milliseconds(10) + std::chrono::seconds(1));
  CHECK(is_ok(pool->execute("SELECT 1")));
}

TEST_CASE("postgres bad credentials are redacted") {
  auto base = dsn();
  auto at = base.find("postgres@");
  REQUIRE(at != std::string::npos);
  auto bad = base.substr(0, at) + "mallory:hunter2@" + base.substr(at + 9);
  try {
    connect(Dialect::postgres(), bad, 1);
    FAIL("expected a connection error");
  } catch (const ConnectionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("mallory") == std::string::npos);
    CHECK(msg.find("hunter2") == std::string::npos);
  }
}

TEST_CASE("postgres write path round-trips awkward values") {
  auto writer = open_session(Dialect::postgres(), dsn(), {.ns = "roundtrip"});
  writer->reset_namespace();
  writer->exec_script("CREATE TABLE t (a bigint, s text, b bytea, d date, ts timestamp, n numeric(10,2), f float8, ok boolean)");
  std::vector<Row> rows{
      {Cell::integer(1), Cell::text("tab\there\nnew \\ line"), Cell::bytes(std::string("\x00\\\t", 3)),
       Cell::date(Date::from_ymd(1999, 12, 31)), Cell::timestamp(*parse_iso_timestamp("2021-01-05T10:00:00.125Z")),
       Cell::decimal(Decimal::parse("12.30")), Cell::floating(0.1), Cell::boolean(false)},
      {Cell::integer(2), Cell::null(), Cell::null(), Cell::null(), Cell::null(), Cell::null(),
       Cell::floating(std::numeric_limits<double>::infinity()), Cell::null()}};
  writer->begin();
  writer->insert_rows("t", {"a", "s", "b", "d", "ts", "n", "f", "ok"}, {}, rows);
  writer->commit();
  CHECK(writer->count_rows("t") == 2);
  std::vector<Row> back;
  writer->scan_table("t", {"a", "s", "b", "d", "ts", "n", "f", "ok"}, 1,
                     [&](const std::vector<Row>& batch) { back.insert(back.end(), batch.begin(), batch.end()); });
  std::sort(back.begin(), back.end(), [](const Row& x, const Row& y) { return x[0].as_int() < y[0].as_int(); });
  CHECK(back == rows);
  writer->reset_namespace();
  CHECK_THROWS_AS(writer->count_rows("t"), MigrationError);
}
