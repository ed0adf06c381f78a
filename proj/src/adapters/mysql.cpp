#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "backends.hpp"
#include "mysql_capi.hpp"
#include "poly/adapters/mysql.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

namespace {

using Clock = std::chrono::steady_clock;

void library_init() {
  static std::once_flag once;
  std::call_once(once, [] { mysql_server_init(0, nullptr, nullptr); });
  mysql_thread_init();
}

struct Conn {
  MYSQL* handle = nullptr;
  ~Conn() {
    if (handle) mysql_close(handle);
  }
};

// Opens a client connection; returns the error message on failure.
std::string open_conn(Conn& c, const Dsn& dsn, const std::string& database) {
  library_init();
  c.handle = mysql_init(nullptr);
  if (!c.handle) return "out of memory";
  unsigned connect_timeout = 10;
  mysql_options(c.handle, MYSQL_OPT_CONNECT_TIMEOUT, &connect_timeout);
  mysql_options(c.handle, MYSQL_SET_CHARSET_NAME, "utf8mb4");
  mysql_options(c.handle, MYSQL_INIT_COMMAND, "SET time_zone = '+00:00'");
  auto socket = dsn.params.find("socket");
  if (!mysql_real_connect(c.handle, dsn.host.empty() ? "localhost" : dsn.host.c_str(),
                          dsn.user.empty() ? nullptr : dsn.user.c_str(),
                          dsn.password.empty() ? nullptr : dsn.password.c_str(),
                          database.empty() ? nullptr : database.c_str(), static_cast<unsigned>(dsn.port.value_or(3306)),
                          socket == dsn.params.end() ? nullptr : socket->second.c_str(), 0)) {
    std::string msg = mysql_error(c.handle);
    mysql_close(c.handle);
    c.handle = nullptr;
    return msg;
  }
  return {};
}

class MysqlSession : public Session {
 public:
  MysqlSession(const Dsn& dsn, const ConnectOptions& options) : dsn_(dsn), options_(options) {
    database_ = !options.ns.empty() ? options.ns : dsn.database;
    // The namespace may not exist yet (first migration), so connect without it.
    if (auto err = open_conn(conn_, dsn_, options.ns.empty() ? dsn.database : ""); !err.empty())
      throw ConnectionError(fmt::format("cannot connect to {}: {}", redact_dsn(dsn.raw), detail::scrub(err, dsn_)));
    if (!options.ns.empty()) run("USE " + quote_identifier(dialect(), options.ns));
    if (options.read_only) exec_script("SET SESSION TRANSACTION READ ONLY");
  }

  Dialect dialect() const override { return Dialect::mysql(); }

  ExecutionOutcome execute(std::string_view sql, std::int64_t timeout_ms) override {
    library_init();
    auto started = Clock::now();
    if (!conn_.handle) return EngineErrorOutcome{ErrorKind::Connection, "connection is not open"};
    run(fmt::format("SET SESSION MAX_EXECUTION_TIME = {}", timeout_ms));

    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    bool killed = false;
    auto thread_id = mysql_thread_id(conn_.handle);
    std::thread watchdog([&] {
      std::unique_lock lk(mu);
      if (cv.wait_for(lk, std::chrono::milliseconds(timeout_ms), [&] { return done; })) return;
      killed = true;
      lk.unlock();
      Conn killer;
      if (open_conn(killer, dsn_, "").empty()) {
        auto q = fmt::format("KILL QUERY {}", thread_id);
        mysql_real_query(killer.handle, q.data(), q.size());
      }
    });
    int rc = mysql_real_query(conn_.handle, sql.data(), static_cast<unsigned long>(sql.size()));
    MYSQL_RES* res = rc == 0 ? mysql_store_result(conn_.handle) : nullptr;
    unsigned code = mysql_errno(conn_.handle);
    std::string message = code ? mysql_error(conn_.handle) : "";
    {
      std::lock_guard lk(mu);
      done = true;
    }
    cv.notify_all();
    watchdog.join();

    std::unique_ptr<MYSQL_RES, decltype(&mysql_free_result)> guard(res, &mysql_free_result);
    if (code) {
      if (is_mysql_timeout(code) || killed) return TimeoutOutcome{timeout_ms};
      return EngineErrorOutcome{classify_mysql_error(code, message), message};
    }
    if (killed) return TimeoutOutcome{timeout_ms};
    if (mysql_next_result(conn_.handle) == 0)
      return EngineErrorOutcome{ErrorKind::Other, "multiple statements are not allowed"};
    if (!res) return OkOutcome{ResultSet(), elapsed(started)};
    try {
      return OkOutcome{decode(res), elapsed(started)};
    } catch (const DecodeError& e) {
      return EngineErrorOutcome{ErrorKind::Other, e.what()};
    }
  }

  bool healthy() override { return conn_.handle && mysql_ping(conn_.handle) == 0; }

  void reset_namespace() override {
    if (database_.empty()) throw ConfigError("mysql namespace not set");
    auto q = quote_identifier(dialect(), database_);
    exec_script(fmt::format("DROP DATABASE IF EXISTS {}", q));
    exec_script(fmt::format("CREATE DATABASE {} CHARACTER SET utf8mb4", q));
    exec_script(fmt::format("USE {}", q));
  }

  void exec_script(std::string_view sql) override {
    for (const auto& stmt : split(sql)) {
      if (auto err = run(stmt); !err.empty()) throw MigrationError(err);
    }
  }

  void begin() override { exec_script("START TRANSACTION"); }
  void commit() override { exec_script("COMMIT"); }
  void rollback() override { exec_script("ROLLBACK"); }

  void insert_rows(const std::string& table, const std::vector<std::string>& columns,
                   const std::vector<LogicalType>&, const std::vector<Row>& rows) override {
    std::string head = "INSERT INTO " + quote_identifier(dialect(), table) + " (";
    for (std::size_t i = 0; i < columns.size(); ++i) head += (i ? ", " : "") + quote_identifier(dialect(), columns[i]);
    head += ") VALUES ";
    std::string sql;
    auto flush = [&] {
      if (sql.empty()) return;
      if (auto err = run(sql); !err.empty()) throw MigrationError(fmt::format("insert into {}: {}", table, err));
      sql.clear();
    };
    for (const auto& row : rows) {
      sql += sql.empty() ? head : ", ";
      sql += '(';
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) sql += ", ";
        sql += literal(row[i]);
      }
      sql += ')';
      if (sql.size() > (1u << 20)) flush();
    }
    flush();
  }

 private:
  static double elapsed(Clock::time_point started) {
    return std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  }

  // Runs a statement and discards any result; returns the error message.
  std::string run(std::string_view sql) {
    if (mysql_real_query(conn_.handle, sql.data(), static_cast<unsigned long>(sql.size())) != 0)
      return mysql_error(conn_.handle);
    if (MYSQL_RES* r = mysql_store_result(conn_.handle)) mysql_free_result(r);
    return {};
  }

  std::string literal(const Cell& c) {
    switch (c.kind()) {
      case CellKind::Null: return "NULL";
      case CellKind::Int: return std::to_string(c.as_int());
      case CellKind::Float:
        if (!std::isfinite(c.as_float())) throw MigrationError("mysql cannot store non-finite floats");
        return text::format_double(c.as_float());
      case CellKind::Decimal: return c.as_decimal().to_string();
      case CellKind::Bool: return c.as_bool() ? "TRUE" : "FALSE";
      case CellKind::Date: return "'" + format_date(c.as_date()) + "'";
      case CellKind::Timestamp: return "'" + format_timestamp_sql(c.as_timestamp()) + "'";
      case CellKind::Bytes: return "X'" + text::hex_encode(c.as_bytes().octets) + "'";
      case CellKind::Text: {
        const auto& s = c.as_text();
        std::string buf(s.size() * 2 + 1, '\0');
        auto n = mysql_real_escape_string(conn_.handle, buf.data(), s.data(), static_cast<unsigned long>(s.size()));
        buf.resize(n);
        return "'" + buf + "'";
      }
    }
    return "NULL";
  }

  static std::vector<std::string> split(std::string_view sql) {
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

  static ResultSet decode(MYSQL_RES* res) {
    unsigned n = mysql_num_fields(res);
    MYSQL_FIELD* raw = mysql_fetch_fields(res);
    std::vector<MysqlField> fields;
    std::vector<std::string> names;
    for (unsigned i = 0; i < n; ++i) {
      fields.push_back(MysqlField{raw[i].name, static_cast<int>(raw[i].type), raw[i].length, raw[i].flags,
                                  raw[i].charsetnr, raw[i].decimals});
      names.emplace_back(raw[i].name);
    }
    std::vector<Row> rows;
    while (MYSQL_ROW r = mysql_fetch_row(res)) {
      unsigned long* lengths = mysql_fetch_lengths(res);
      Row row;
      for (unsigned i = 0; i < n; ++i) {
        std::optional<std::string_view> v;
        if (r[i]) v = std::string_view(r[i], lengths[i]);
        try {
          row.push_back(decode_mysql_value(fields[i], v));
        } catch (const DecodeError& e) {
          throw DecodeError(fmt::format("cannot decode column '{}': {}", names[i], e.what()));
        }
      }
      rows.push_back(std::move(row));
    }
    return ResultSet(std::move(names), std::move(rows));
  }

  Dsn dsn_;
  ConnectOptions options_;
  std::string database_;
  Conn conn_;
};

}  // namespace

namespace detail {

std::unique_ptr<Session> open_mysql(const Dsn& dsn, const ConnectOptions& options) {
  return std::make_unique<MysqlSession>(dsn, options);
}

}  // namespace detail

}  // namespace poly::adapters
