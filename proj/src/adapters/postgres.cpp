#include "poly/adapters/postgres.hpp"

#include <fmt/format.h>
#include <libpq-fe.h>
#include <sys/select.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>

#include "backends.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

namespace {

enum Oid : unsigned {
  kBool = 16,
  kBytea = 17,
  kInt8 = 20,
  kInt2 = 21,
  kInt4 = 23,
  kOidType = 26,
  kFloat4 = 700,
  kFloat8 = 701,
  kDate = 1082,
  kTimestamp = 1114,
  kTimestampTz = 1184,
  kNumeric = 1700,
};

}  // namespace

Cell decode_postgres_value(unsigned oid, std::string_view v) {
  switch (oid) {
    case kBool:
      if (v == "t") return Cell::boolean(true);
      if (v == "f") return Cell::boolean(false);
      break;
    case kBytea:
      if (v.starts_with("\\x")) {
        try {
          return Cell::bytes(text::hex_decode(v.substr(2)));
        } catch (const ParseError&) {
        }
      }
      break;
    case kInt2:
    case kInt4:
    case kInt8:
    case kOidType: {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
      if (ec == std::errc{} && p == v.data() + v.size()) return Cell::integer(i);
      break;
    }
    case kFloat4:
    case kFloat8:
      if (v == "NaN") return Cell::floating(std::numeric_limits<double>::quiet_NaN());
      if (v == "Infinity") return Cell::floating(std::numeric_limits<double>::infinity());
      if (v == "-Infinity") return Cell::floating(-std::numeric_limits<double>::infinity());
      try {
        return Cell::floating(text::parse_double(v));
      } catch (const ParseError&) {
      }
      break;
    case kNumeric:
      if (v == "NaN") return Cell::floating(std::numeric_limits<double>::quiet_NaN());
      try {
        return Cell::decimal(Decimal::parse(v));
      } catch (const ParseError&) {
      }
      break;
    case kDate:
      if (auto d = parse_iso_date(v)) return Cell::date(*d);
      break;
    case kTimestamp:
      if (auto t = parse_iso_timestamp(v, false)) return Cell::timestamp(*t);
      break;
    case kTimestampTz:
      if (auto t = parse_iso_timestamp(v, true)) return Cell::timestamp(*t);
      break;
    default: return Cell::text(std::string(v));
  }
  throw DecodeError(fmt::format("'{}' is not a valid value of type oid {}", v, oid));
}

ErrorKind classify_sqlstate(std::string_view state, std::string_view message) {
  if (state == "42601") return ErrorKind::Syntax;
  if (state == "42883") return text::icontains(message, "operator") ? ErrorKind::Semantic : ErrorKind::Syntax;
  if (state.starts_with("42")) return ErrorKind::Semantic;
  if (state.starts_with("23")) return ErrorKind::Constraint;
  if (state.starts_with("08") || state.starts_with("57P") || state == "28P01" || state == "28000")
    return ErrorKind::Connection;
  if (state.size() == 5) return ErrorKind::Other;
  return classify_message(message);
}

void append_copy_field(std::string& out, const Cell& c) {
  auto escape = [&](std::string_view s) {
    for (char ch : s) {
      switch (ch) {
        case '\\': out += "\\\\"; break;
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        default: out += ch;
      }
    }
  };
  switch (c.kind()) {
    case CellKind::Null: out += "\\N"; break;
    case CellKind::Int: out += std::to_string(c.as_int()); break;
    case CellKind::Float: {
      double d = c.as_float();
      if (std::isnan(d)) out += "NaN";
      else if (std::isinf(d)) out += d > 0 ? "Infinity" : "-Infinity";
      else out += text::format_double(d);
      break;
    }
    case CellKind::Decimal: out += c.as_decimal().to_string(); break;
    case CellKind::Text: escape(c.as_text()); break;
    case CellKind::Bool: out += c.as_bool() ? "t" : "f"; break;
    case CellKind::Date: out += format_date(c.as_date()); break;
    case CellKind::Timestamp: out += format_timestamp_sql(c.as_timestamp()); break;
    case CellKind::Bytes: out += "\\\\x" + text::hex_encode(c.as_bytes().octets); break;
  }
}

namespace {

using Clock = std::chrono::steady_clock;
constexpr auto kGrace = std::chrono::milliseconds(800);

struct ResultDeleter {
  void operator()(PGresult* r) const { PQclear(r); }
};
using Result = std::unique_ptr<PGresult, ResultDeleter>;

class PostgresSession : public Session {
 public:
  PostgresSession(const Dsn& dsn, const ConnectOptions& options) : dsn_(dsn), options_(options) {
    std::string uri = dsn.raw;
    if (!dsn.params.count("connect_timeout")) uri += (uri.find('?') == std::string::npos ? "?" : "&") + std::string("connect_timeout=10");
    conn_ = PQconnectdb(uri.c_str());
    if (!conn_ || PQstatus(conn_) != CONNECTION_OK) {
      std::string msg = conn_ ? PQerrorMessage(conn_) : "out of memory";
      PQfinish(conn_);
      conn_ = nullptr;
      throw ConnectionError(fmt::format("cannot connect to {}: {}", redact_dsn(dsn.raw),
                                        detail::scrub(std::string(text::trim(msg)), dsn)));
    }
    PQsetNoticeProcessor(conn_, [](void*, const char*) {}, nullptr);
    std::string setup = "SET TimeZone = 'UTC'; SET DateStyle = 'ISO, YMD'; SET bytea_output = 'hex'; "
                        "SET extra_float_digits = 3; SET client_encoding = 'UTF8'";
    if (!options.ns.empty()) setup += "; SET search_path TO " + quote_identifier(Dialect::postgres(), options.ns);
    if (options.read_only) setup += "; SET default_transaction_read_only = on";
    Result r(PQexec(conn_, setup.c_str()));
    if (PQresultStatus(r.get()) != PGRES_COMMAND_OK) {
      std::string msg = PQresultErrorMessage(r.get());
      PQfinish(conn_);
      conn_ = nullptr;
      throw ConnectionError(fmt::format("session setup on {} failed: {}", redact_dsn(dsn.raw), text::trim(msg)));
    }
  }
  ~PostgresSession() override { PQfinish(conn_); }

  Dialect dialect() const override { return Dialect::postgres(); }

  ExecutionOutcome execute(std::string_view sql, std::int64_t timeout_ms) override {
    auto started = Clock::now();
    auto deadline = started + std::chrono::milliseconds(timeout_ms);
    if (!conn_ || PQstatus(conn_) != CONNECTION_OK)
      return EngineErrorOutcome{ErrorKind::Connection, "connection is not open"};
    // Server-side backstop in case the cancel request is lost.
    if (timeout_ms != statement_timeout_) {
      Result r(PQexec(conn_, fmt::format("SET statement_timeout = {}", timeout_ms + kGrace.count()).c_str()));
      if (PQresultStatus(r.get()) == PGRES_COMMAND_OK) statement_timeout_ = timeout_ms;
    }
    std::string q(sql);
    if (!PQsendQueryParams(conn_, q.c_str(), 0, nullptr, nullptr, nullptr, nullptr, 0))
      return EngineErrorOutcome{ErrorKind::Connection, text_of(PQerrorMessage(conn_))};

    bool cancelled = false;
    while (PQisBusy(conn_)) {
      auto now = Clock::now();
      if (!cancelled && now >= deadline) {
        cancel();
        cancelled = true;
        deadline = now + kGrace;
      } else if (cancelled && now >= deadline) {
        // The server did not acknowledge the cancel; drop the connection.
        PQfinish(conn_);
        conn_ = nullptr;
        return TimeoutOutcome{timeout_ms};
      }
      if (!wait_readable(deadline - Clock::now())) continue;
      if (!PQconsumeInput(conn_)) return EngineErrorOutcome{ErrorKind::Connection, text_of(PQerrorMessage(conn_))};
    }

    std::optional<ExecutionOutcome> outcome;
    while (PGresult* raw = PQgetResult(conn_)) {
      Result res(raw);
      if (outcome) continue;  // drain
      auto status = PQresultStatus(res.get());
      if (status == PGRES_TUPLES_OK || status == PGRES_COMMAND_OK) {
        try {
          auto rs = decode(res.get());
          double elapsed = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
          outcome = OkOutcome{std::move(rs), elapsed};
        } catch (const DecodeError& e) {
          outcome = EngineErrorOutcome{ErrorKind::Other, e.what()};
        }
      } else {
        const char* state = PQresultErrorField(res.get(), PG_DIAG_SQLSTATE);
        const char* primary = PQresultErrorField(res.get(), PG_DIAG_MESSAGE_PRIMARY);
        std::string st = state ? state : "";
        std::string msg = primary ? primary : text_of(PQresultErrorMessage(res.get()));
        if (st == "57014" || cancelled)
          outcome = TimeoutOutcome{timeout_ms};
        else
          outcome = EngineErrorOutcome{classify_sqlstate(st, msg), msg};
      }
    }
    if (!outcome) return EngineErrorOutcome{ErrorKind::Other, "no result returned"};
    return *outcome;
  }

  bool healthy() override {
    if (!conn_ || PQstatus(conn_) != CONNECTION_OK) return false;
    Result r(PQexec(conn_, "SELECT 1"));
    return PQresultStatus(r.get()) == PGRES_TUPLES_OK;
  }

  void reset_namespace() override {
    if (options_.ns.empty()) throw ConfigError("postgres namespace not set");
    auto q = quote_identifier(dialect(), options_.ns);
    exec_script(fmt::format("DROP SCHEMA IF EXISTS {0} CASCADE; CREATE SCHEMA {0}; SET search_path TO {0}", q));
  }

  void exec_script(std::string_view sql) override {
    Result r(PQexec(conn_, std::string(sql).c_str()));
    auto st = PQresultStatus(r.get());
    if (st != PGRES_COMMAND_OK && st != PGRES_TUPLES_OK)
      throw MigrationError(text_of(PQresultErrorMessage(r.get())));
  }

  void begin() override { exec_script("BEGIN"); }
  void commit() override { exec_script("COMMIT"); }
  void rollback() override {
    if (conn_ && PQtransactionStatus(conn_) != PQTRANS_IDLE) exec_script("ROLLBACK");
  }

  void insert_rows(const std::string& table, const std::vector<std::string>& columns,
                   const std::vector<LogicalType>&, const std::vector<Row>& rows) override {
    std::string sql = "COPY " + quote_identifier(dialect(), table) + " (";
    for (std::size_t i = 0; i < columns.size(); ++i) sql += (i ? ", " : "") + quote_identifier(dialect(), columns[i]);
    sql += ") FROM STDIN";
    Result start(PQexec(conn_, sql.c_str()));
    if (PQresultStatus(start.get()) != PGRES_COPY_IN)
      throw MigrationError(fmt::format("copy into {}: {}", table, text_of(PQresultErrorMessage(start.get()))));
    std::string buf;
    auto flush = [&] {
      if (!buf.empty() && PQputCopyData(conn_, buf.data(), static_cast<int>(buf.size())) != 1)
        throw MigrationError(fmt::format("copy into {}: {}", table, text_of(PQerrorMessage(conn_))));
      buf.clear();
    };
    try {
      for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
          if (i) buf += '\t';
          append_copy_field(buf, row[i]);
        }
        buf += '\n';
        if (buf.size() > (1u << 20)) flush();
      }
      flush();
    } catch (...) {
      PQputCopyEnd(conn_, "aborted");
      while (PGresult* r = PQgetResult(conn_)) PQclear(r);
      throw;
    }
    PQputCopyEnd(conn_, nullptr);
    std::string failure;
    while (PGresult* raw = PQgetResult(conn_)) {
      Result r(raw);
      if (PQresultStatus(r.get()) != PGRES_COMMAND_OK && failure.empty())
        failure = text_of(PQresultErrorMessage(r.get()));
    }
    if (!failure.empty()) throw MigrationError(fmt::format("copy into {}: {}", table, failure));
  }

 private:
  static std::string text_of(const char* s) { return std::string(text::trim(s ? s : "")); }

  void cancel() {
    if (PGcancel* c = PQgetCancel(conn_)) {
      char err[256];
      PQcancel(c, err, sizeof err);
      PQfreeCancel(c);
    }
  }

  bool wait_readable(Clock::duration left) {
    if (left < Clock::duration::zero()) left = Clock::duration::zero();
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(left).count();
    int fd = PQsocket(conn_);
    fd_set set;
    FD_ZERO(&set);
    FD_SET(fd, &set);
    timeval tv{static_cast<time_t>(us / 1'000'000), static_cast<suseconds_t>(us % 1'000'000)};
    return select(fd + 1, &set, nullptr, nullptr, &tv) > 0;
  }

  static ResultSet decode(PGresult* res) {
    int nf = PQnfields(res);
    int nr = PQntuples(res);
    std::vector<std::string> names;
    std::vector<unsigned> oids;
    for (int c = 0; c < nf; ++c) {
      names.emplace_back(PQfname(res, c));
      oids.push_back(PQftype(res, c));
    }
    std::vector<Row> rows;
    rows.reserve(static_cast<std::size_t>(nr));
    for (int r = 0; r < nr; ++r) {
      Row row;
      row.reserve(static_cast<std::size_t>(nf));
      for (int c = 0; c < nf; ++c) {
        if (PQgetisnull(res, r, c)) {
          row.push_back(Cell::null());
          continue;
        }
        std::string_view v(PQgetvalue(res, r, c), static_cast<std::size_t>(PQgetlength(res, r, c)));
        try {
          row.push_back(decode_postgres_value(oids[static_cast<std::size_t>(c)], v));
        } catch (const DecodeError& e) {
          throw DecodeError(fmt::format("cannot decode column '{}': {}", names[static_cast<std::size_t>(c)], e.what()));
        }
      }
      rows.push_back(std::move(row));
    }
    return ResultSet(std::move(names), std::move(rows));
  }

  Dsn dsn_;
  ConnectOptions options_;
  PGconn* conn_ = nullptr;
  std::int64_t statement_timeout_ = -1;
};

}  // namespace

namespace detail {

std::unique_ptr<Session> open_postgres(const Dsn& dsn, const ConnectOptions& options) {
  return std::make_unique<PostgresSession>(dsn, options);
}

}  // namespace detail

}  // namespace poly::adapters
