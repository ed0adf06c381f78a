#include "poly/adapters/clickhouse.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <future>
#include <random>

#include "backends.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

namespace {

std::string unescape_tsv(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    char c = s[++i];
    switch (c) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 'b': out += '\b'; break;
      case 'f': out += '\f'; break;
      case '0': out += '\0'; break;
      case 'a': out += '\a'; break;
      case 'v': out += '\v'; break;
      default: out += c;  // \\ \' and unknown escapes
    }
  }
  return out;
}

void escape_tsv(std::string& out, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\0': out += "\\0"; break;
      default: out += c;
    }
  }
}

// Strips Nullable(...) and LowCardinality(...) wrappers.
std::string_view base_type(std::string_view t) {
  for (bool changed = true; changed;) {
    changed = false;
    for (std::string_view w : {"Nullable(", "LowCardinality("}) {
      if (t.starts_with(w) && t.ends_with(')')) {
        t = t.substr(w.size(), t.size() - w.size() - 1);
        changed = true;
      }
    }
  }
  return t;
}

// Scale of Decimal(P, S) / DecimalNN(S).
int decimal_scale(std::string_view t) {
  auto open = t.find('(');
  auto close = t.rfind(')');
  if (open == std::string_view::npos || close == std::string_view::npos) return -1;
  auto args = t.substr(open + 1, close - open - 1);
  auto comma = args.rfind(',');
  auto s = text::trim(comma == std::string_view::npos ? args : args.substr(comma + 1));
  int scale = -1;
  std::from_chars(s.data(), s.data() + s.size(), scale);
  return scale;
}

Cell integer_cell(std::string_view v) {
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec == std::errc{} && p == v.data() + v.size()) return Cell::integer(i);
  Decimal d = Decimal::parse(v);  // beyond int64: UInt64 / Int128 / Int256
  if (d.scale() != 0) throw DecodeError(fmt::format("'{}' is not an integer", v));
  return Cell::decimal(std::move(d));
}

}  // namespace

Cell decode_clickhouse_value(std::string_view type, std::string_view value) {
  auto t = base_type(type);
  try {
    if (t.starts_with("Int") || t.starts_with("UInt")) return integer_cell(value);
    if (t == "Float32" || t == "Float64") return Cell::floating(text::parse_double(value));
    if (t.starts_with("Decimal")) {
      Decimal d = Decimal::parse(value);
      int scale = decimal_scale(t);
      if (scale > d.scale())
        d = Decimal(d.unscaled() * boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(scale - d.scale())),
                    scale);
      return Cell::decimal(std::move(d));
    }
    if (t == "Bool") {
      if (value == "true" || value == "1") return Cell::boolean(true);
      if (value == "false" || value == "0") return Cell::boolean(false);
      throw DecodeError(fmt::format("'{}' is not a boolean", value));
    }
    if (t == "Date" || t == "Date32") {
      if (auto d = parse_iso_date(value)) return Cell::date(*d);
      throw DecodeError(fmt::format("'{}' is not a date", value));
    }
    if (t.starts_with("DateTime")) {
      if (auto ts = parse_iso_timestamp(value)) return Cell::timestamp(*ts);
      throw DecodeError(fmt::format("'{}' is not a timestamp", value));
    }
    if (t.starts_with("FixedString")) {
      auto end = value.find_last_not_of('\0');
      return Cell::text(std::string(value.substr(0, end == std::string_view::npos ? 0 : end + 1)));
    }
  } catch (const ParseError& e) {
    throw DecodeError(e.what());
  }
  return Cell::text(std::string(value));
}

ResultSet decode_clickhouse_tsv(std::string_view body) {
  std::vector<std::string_view> lines;
  for (std::size_t at = 0; at < body.size();) {
    auto nl = body.find('\n', at);
    if (nl == std::string_view::npos) nl = body.size();
    lines.push_back(body.substr(at, nl - at));
    at = nl + 1;
  }
  if (lines.size() < 2) throw DecodeError("response lacks the names and types header");
  auto split_fields = [](std::string_view line) {
    std::vector<std::string_view> f;
    for (std::size_t at = 0;;) {
      auto tab = line.find('\t', at);
      f.push_back(line.substr(at, tab == std::string_view::npos ? std::string_view::npos : tab - at));
      if (tab == std::string_view::npos) break;
      at = tab + 1;
    }
    return f;
  };
  std::vector<std::string> names;
  for (auto f : split_fields(lines[0])) names.push_back(unescape_tsv(f));
  std::vector<std::string> types;
  for (auto f : split_fields(lines[1])) types.push_back(unescape_tsv(f));
  if (names.size() != types.size()) throw DecodeError("names and types header widths differ");
  std::vector<Row> rows;
  for (std::size_t li = 2; li < lines.size(); ++li) {
    auto fields = split_fields(lines[li]);
    if (fields.size() != names.size()) throw DecodeError(fmt::format("row {} has {} fields, expected {}", li - 2,
                                                                     fields.size(), names.size()));
    Row row;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (fields[c] == "\\N") {
        row.push_back(Cell::null());
        continue;
      }
      try {
        row.push_back(decode_clickhouse_value(types[c], unescape_tsv(fields[c])));
      } catch (const DecodeError& e) {
        throw DecodeError(fmt::format("cannot decode column '{}' ({}): {}", names[c], types[c], e.what()));
      }
    }
    rows.push_back(std::move(row));
  }
  return ResultSet(std::move(names), std::move(rows));
}

std::string encode_clickhouse_tsv_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += '\t';
    const Cell& c = row[i];
    switch (c.kind()) {
      case CellKind::Null: out += "\\N"; break;
      case CellKind::Int: out += std::to_string(c.as_int()); break;
      case CellKind::Float: out += text::format_double(c.as_float()); break;
      case CellKind::Decimal: out += c.as_decimal().to_string(); break;
      case CellKind::Text: escape_tsv(out, c.as_text()); break;
      case CellKind::Bool: out += c.as_bool() ? "true" : "false"; break;
      case CellKind::Date: out += format_date(c.as_date()); break;
      case CellKind::Timestamp: out += format_timestamp_sql(c.as_timestamp()); break;
      case CellKind::Bytes: escape_tsv(out, c.as_bytes().octets); break;
    }
  }
  out += '\n';
  return out;
}

ClickhouseError classify_clickhouse_error(std::string_view code_header, std::string_view body) {
  ClickhouseError err;
  auto parse_code = [&](std::string_view s) {
    int code = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), code);
    if (ec == std::errc{} && p != s.data()) err.code = code;
  };
  if (!code_header.empty()) parse_code(text::trim(code_header));
  if (!err.code) {
    if (auto at = body.find("Code: "); at != std::string_view::npos) parse_code(body.substr(at + 6));
  }
  if (!err.code) {
    err.kind = classify_message(body);
    return err;
  }
  switch (*err.code) {
    case 62:   // SYNTAX_ERROR
    case 46:   // UNKNOWN_FUNCTION
      err.kind = ErrorKind::Syntax;
      break;
    case 47:   // UNKNOWN_IDENTIFIER
    case 60:   // UNKNOWN_TABLE
    case 81:   // UNKNOWN_DATABASE
    case 43:   // ILLEGAL_TYPE_OF_ARGUMENT
    case 42:   // NUMBER_OF_ARGUMENTS_DOESNT_MATCH
    case 53:   // TYPE_MISMATCH
    case 184:  // ILLEGAL_AGGREGATION
    case 215:  // NOT_AN_AGGREGATE
    case 352:  // AMBIGUOUS_COLUMN_NAME
    case 386:  // NO_COMMON_TYPE
      err.kind = ErrorKind::Semantic;
      break;
    case 159:  // TIMEOUT_EXCEEDED
    case 394:  // QUERY_WAS_CANCELLED
      err.timeout = true;
      break;
    case 192:  // UNKNOWN_USER
    case 193:  // WRONG_PASSWORD
    case 210:  // NETWORK_ERROR
    case 516:  // AUTHENTICATION_FAILED
      err.kind = ErrorKind::Connection;
      break;
    default: err.kind = classify_message(body);
  }
  return err;
}

namespace {

using Clock = std::chrono::steady_clock;
constexpr auto kGrace = std::chrono::milliseconds(500);

std::string new_query_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = std::random_device{}();
  return fmt::format("polyeval-{:016x}-{}", salt, counter.fetch_add(1));
}

class ClickhouseSession : public Session {
 public:
  ClickhouseSession(const Dsn& dsn, const ConnectOptions& options) : dsn_(dsn), options_(options) {
    std::string scheme = dsn.scheme == "https" || dsn.params.count("secure") ? "https" : "http";
    base_ = fmt::format("{}://{}:{}", scheme, dsn.host.empty() ? "localhost" : dsn.host,
                        dsn.port.value_or(scheme == "https" ? 8443 : 8123));
    database_ = !options.ns.empty() ? options.ns : dsn.database;
    auto probe = post("SELECT 1", {}, 10'000, false);
    if (probe.status != 200)
      throw ConnectionError(fmt::format("cannot connect to {}: {}", redact_dsn(dsn.raw),
                                        detail::scrub(probe.error.empty() ? probe.body : probe.error, dsn_)));
  }

  Dialect dialect() const override { return Dialect::clickhouse(); }

  ExecutionOutcome execute(std::string_view sql, std::int64_t timeout_ms) override {
    auto started = Clock::now();
    httplib::Params params{{"default_format", "TabSeparatedWithNamesAndTypes"},
                           {"date_time_output_format", "iso"},
                           {"max_execution_time", std::to_string(timeout_ms / 1000 + 1)}};
    if (options_.read_only) params.emplace("readonly", "2");
    auto r = post(std::string(sql), params, timeout_ms, true);
    if (r.timed_out) return TimeoutOutcome{timeout_ms};
    if (!r.error.empty()) return EngineErrorOutcome{ErrorKind::Connection, detail::scrub(r.error, dsn_)};
    if (r.status != 200) {
      auto err = classify_clickhouse_error(r.code_header, r.body);
      if (err.timeout) return TimeoutOutcome{timeout_ms};
      return EngineErrorOutcome{err.kind, std::string(text::trim(r.body))};
    }
    try {
      auto rs = decode_clickhouse_tsv(r.body);
      double elapsed = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
      return OkOutcome{std::move(rs), elapsed};
    } catch (const Error& e) {
      return EngineErrorOutcome{ErrorKind::Other, e.what()};
    }
  }

  bool healthy() override {
    httplib::Client cli(base_);
    cli.set_connection_timeout(std::chrono::seconds(5));
    auto res = cli.Get("/ping");
    return res && res->status == 200;
  }

  void reset_namespace() override {
    if (database_.empty()) throw ConfigError("clickhouse namespace not set");
    auto q = quote_identifier(dialect(), database_);
    command("DROP DATABASE IF EXISTS " + q, false);
    command("CREATE DATABASE " + q, false);
  }

  void exec_script(std::string_view sql) override {
    for (const auto& stmt : split_statements(sql)) command(stmt, true);
  }

  // ClickHouse has no multi-statement transactions; each insert batch is atomic.
  void begin() override {}
  void commit() override {}
  void rollback() override {}

  void insert_rows(const std::string& table, const std::vector<std::string>& columns,
                   const std::vector<LogicalType>&, const std::vector<Row>& rows) override {
    if (rows.empty()) return;
    std::string sql = "INSERT INTO " + quote_identifier(dialect(), table) + " (";
    for (std::size_t i = 0; i < columns.size(); ++i) sql += (i ? ", " : "") + quote_identifier(dialect(), columns[i]);
    sql += ") FORMAT TabSeparated\n";
    for (const auto& row : rows) sql += encode_clickhouse_tsv_row(row);
    command(sql, true);
  }

 private:
  struct Response {
    int status = 0;
    std::string body;
    std::string code_header;
    std::string error;
    bool timed_out = false;
  };

  httplib::Headers auth_headers() const {
    httplib::Headers h;
    if (!dsn_.user.empty()) h.emplace("X-ClickHouse-User", dsn_.user);
    if (!dsn_.password.empty()) h.emplace("X-ClickHouse-Key", dsn_.password);
    return h;
  }

  // Posts `sql` as the request body. The caller is never blocked past
  // timeout_ms + grace: on expiry the socket is closed and the query killed.
  Response post(const std::string& sql, httplib::Params params, std::int64_t timeout_ms, bool use_database) {
    auto query_id = new_query_id();
    params.emplace("query_id", query_id);
    if (use_database && !database_.empty()) params.emplace("database", database_);
    auto path = httplib::append_query_params("/", params);
    auto cli = std::make_shared<httplib::Client>(base_);
    cli->set_connection_timeout(std::chrono::seconds(10));
    cli->set_read_timeout(std::chrono::milliseconds(timeout_ms) + kGrace);
    auto headers = auth_headers();
    auto fut = std::async(std::launch::async, [cli, path, headers, sql] {
      Response r;
      auto res = cli->Post(path, headers, sql, "text/plain");
      if (!res) {
        r.error = "request failed: " + httplib::to_string(res.error());
        r.timed_out = res.error() == httplib::Error::Read;
        return r;
      }
      r.status = res->status;
      r.body = res->body;
      r.code_header = res->get_header_value("X-ClickHouse-Exception-Code");
      return r;
    });
    if (fut.wait_for(std::chrono::milliseconds(timeout_ms) + kGrace / 2) == std::future_status::ready) {
      auto r = fut.get();
      if (r.timed_out) kill(query_id);
      return r;
    }
    cli->stop();
    kill(query_id);
    fut.wait();
    Response r;
    r.timed_out = true;
    return r;
  }

  void kill(const std::string& query_id) {
    httplib::Client cli(base_);
    cli.set_connection_timeout(std::chrono::seconds(2));
    cli.set_read_timeout(std::chrono::seconds(2));
    cli.Post("/", auth_headers(), fmt::format("KILL QUERY WHERE query_id = '{}' ASYNC", query_id), "text/plain");
  }

  void command(const std::string& sql, bool use_database) {
    auto r = post(sql, {}, 600'000, use_database);
    if (r.timed_out) throw MigrationError("clickhouse command timed out");
    if (!r.error.empty()) throw MigrationError(detail::scrub(r.error, dsn_));
    if (r.status != 200) throw MigrationError(std::string(text::trim(r.body)));
  }

  static std::vector<std::string> split_statements(std::string_view sql) {
    std::vector<std::string> out;
    std::string cur;
    char quote = 0;
    for (std::size_t i = 0; i < sql.size(); ++i) {
      char c = sql[i];
      if (quote) {
        cur += c;
        if (c == '\\' && i + 1 < sql.size()) cur += sql[++i];
        else if (c == quote) quote = 0;
      } else if (c == '\'' || c == '"' || c == '`') {
        quote = c;
        cur += c;
      } else if (c == ';') {
        if (!text::trim(cur).empty()) out.emplace_back(text::trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!text::trim(cur).empty()) out.emplace_back(text::trim(cur));
    return out;
  }

  Dsn dsn_;
  ConnectOptions options_;
  std::string base_;
  std::string database_;
};

}  // namespace

namespace detail {

std::unique_ptr<Session> open_clickhouse(const Dsn& dsn, const ConnectOptions& options) {
  return std::make_unique<ClickhouseSession>(dsn, options);
}

}  // namespace detail

}  // namespace poly::adapters
