#include "poly/adapters/sqlite.hpp"

#include <fmt/format.h>
#include <sqlite3.h>

#include <chrono>

#include "backends.hpp"
#include "poly/comparator/comparator.hpp"
#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

fs::path sqlite_file_for(const std::string& dsn_path, const std::string& ns) {
  fs::path p(dsn_path);
  std::error_code ec;
  if (!ns.empty() && fs::is_directory(p, ec)) return p / (ns + ".sqlite");
  return p;
}

std::optional<TypeKind> hinted_kind_from_decltype(std::string_view declared) {
  auto upper = text::to_upper(declared);
  if (upper.find("DATETIME") != std::string::npos || upper.find("TIMESTAMP") != std::string::npos)
    return TypeKind::Timestamp;
  if (upper.find("DATE") != std::string::npos) return TypeKind::Date;
  if (upper.find("BOOL") != std::string::npos) return TypeKind::Boolean;
  return std::nullopt;
}

ResultSet quirk_perturb(const ResultSet& rs, std::string_view sql) {
  std::vector<std::string> cols;
  for (const auto& c : rs.columns()) cols.push_back(text::to_upper(c));
  std::vector<Row> rows;
  rows.reserve(rs.row_count());
  for (const auto& row : rs.rows()) {
    Row out;
    out.reserve(row.size());
    for (const auto& c : row) {
      switch (c.kind()) {
        case CellKind::Date: out.push_back(Cell::text(format_date(c.as_date()))); break;
        case CellKind::Timestamp: out.push_back(Cell::text(format_timestamp_iso(c.as_timestamp()))); break;
        case CellKind::Float: out.push_back(Cell::floating(c.as_float() * (1.0 + 1e-7))); break;
        case CellKind::Text: out.push_back(Cell::text(c.as_text() + " ")); break;
        default: out.push_back(c);
      }
    }
    rows.push_back(std::move(out));
  }
  if (rows.size() > 1 && !cmp::contains_order_by(sql)) std::rotate(rows.begin(), rows.begin() + 1, rows.end());
  return ResultSet(std::move(cols), std::move(rows));
}

namespace {

struct Deadline {
  Clock::time_point at;
  bool fired = false;
};

int progress_cb(void* p) {
  auto* d = static_cast<Deadline*>(p);
  if (Clock::now() >= d->at) {
    d->fired = true;
    return 1;
  }
  return 0;
}

class SqliteSession : public Session {
 public:
  SqliteSession(Dialect dialect, fs::path file, const ConnectOptions& options)
      : dialect_(std::move(dialect)), file_(std::move(file)), options_(options) {
    int flags = (options.read_only ? SQLITE_OPEN_READONLY : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE)) |
                SQLITE_OPEN_NOMUTEX;
    int rc = sqlite3_open_v2(file_.c_str(), &db_, flags, nullptr);
    if (rc != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : sqlite3_errstr(rc);
      sqlite3_close(db_);
      db_ = nullptr;
      throw ConnectionError(fmt::format("cannot open {}: {}", file_.string(), msg));
    }
    sqlite3_busy_timeout(db_, 5000);
    sqlite3_extended_result_codes(db_, 0);
  }
  ~SqliteSession() override { sqlite3_close_v2(db_); }

  Dialect dialect() const override { return dialect_; }

  ExecutionOutcome execute(std::string_view sql, std::int64_t timeout_ms) override {
    auto outcome = run_query(sql, timeout_ms, true);
    if (dialect_.id() == "quirk")
      if (auto* ok = std::get_if<OkOutcome>(&outcome)) ok->result = quirk_perturb(ok->result, sql);
    return outcome;
  }

  bool healthy() override { return db_ && sqlite3_exec(db_, "SELECT 1", nullptr, nullptr, nullptr) == SQLITE_OK; }

  void reset_namespace() override {
    exec_script("PRAGMA foreign_keys = OFF");
    std::vector<std::pair<std::string, std::string>> objects;
    sqlite3_stmt* st = nullptr;
    sqlite3_prepare_v2(db_,
                       "SELECT type, name FROM sqlite_master WHERE name NOT LIKE 'sqlite_%' "
                       "AND type IN ('table','view') ORDER BY type DESC",
                       -1, &st, nullptr);
    while (sqlite3_step(st) == SQLITE_ROW)
      objects.emplace_back(reinterpret_cast<const char*>(sqlite3_column_text(st, 0)),
                           reinterpret_cast<const char*>(sqlite3_column_text(st, 1)));
    sqlite3_finalize(st);
    for (const auto& [type, name] : objects)
      exec_script(fmt::format("DROP {} IF EXISTS {}", type == "view" ? "VIEW" : "TABLE",
                              quote_identifier(dialect_, name)));
  }

  void exec_script(std::string_view sql) override {
    char* err = nullptr;
    std::string s(sql);
    if (sqlite3_exec(db_, s.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
      std::string msg = err ? err : "unknown error";
      sqlite3_free(err);
      throw MigrationError(msg);
    }
  }

  void begin() override { exec_script("BEGIN"); }
  void commit() override { exec_script("COMMIT"); }
  void rollback() override {
    if (!sqlite3_get_autocommit(db_)) exec_script("ROLLBACK");
  }

  void insert_rows(const std::string& table, const std::vector<std::string>& columns,
                   const std::vector<LogicalType>&, const std::vector<Row>& rows) override {
    std::string sql = "INSERT INTO " + quote_identifier(dialect_, table) + " (";
    for (std::size_t i = 0; i < columns.size(); ++i) sql += (i ? ", " : "") + quote_identifier(dialect_, columns[i]);
    sql += ") VALUES (";
    for (std::size_t i = 0; i < columns.size(); ++i) sql += i ? ", ?" : "?";
    sql += ")";
    sqlite3_stmt* st = nullptr;
    if (sqlite3_prepare_v2(db_, sql.c_str(), -1, &st, nullptr) != SQLITE_OK)
      throw MigrationError(fmt::format("insert into {}: {}", table, sqlite3_errmsg(db_)));
    for (const auto& row : rows) {
      sqlite3_reset(st);
      for (std::size_t i = 0; i < row.size(); ++i) bind(st, static_cast<int>(i + 1), row[i]);
      if (sqlite3_step(st) != SQLITE_DONE) {
        std::string msg = sqlite3_errmsg(db_);
        sqlite3_finalize(st);
        throw MigrationError(fmt::format("insert into {}: {}", table, msg));
      }
    }
    sqlite3_finalize(st);
  }

  void scan_table(const std::string& table, const std::vector<std::string>& columns, std::size_t batch_size,
                  const std::function<void(const std::vector<Row>&)>& sink) override {
    std::string sql = "SELECT ";
    for (std::size_t i = 0; i < columns.size(); ++i) sql += (i ? ", " : "") + quote_identifier(dialect_, columns[i]);
    sql += " FROM " + quote_identifier(dialect_, table);
    sqlite3_stmt* st = nullptr;
    if (sqlite3_prepare_v2(db_, sql.c_str(), -1, &st, nullptr) != SQLITE_OK)
      throw MigrationError(fmt::format("scan of {}: {}", table, sqlite3_errmsg(db_)));
    auto hints = column_hints(st);
    std::vector<Row> batch;
    int rc;
    while ((rc = sqlite3_step(st)) == SQLITE_ROW) {
      batch.push_back(decode_row(st, hints));
      if (batch_size && batch.size() >= batch_size) {
        sink(batch);
        batch.clear();
      }
    }
    std::string msg = rc == SQLITE_DONE ? "" : sqlite3_errmsg(db_);
    sqlite3_finalize(st);
    if (!msg.empty()) throw MigrationError(fmt::format("scan of {}: {}", table, msg));
    if (!batch.empty()) sink(batch);
  }

 private:
  ExecutionOutcome run_query(std::string_view sql, std::int64_t timeout_ms, bool read_only_check) {
    auto started = Clock::now();
    sqlite3_stmt* st = nullptr;
    const char* tail = nullptr;
    int rc = sqlite3_prepare_v2(db_, sql.data(), static_cast<int>(sql.size()), &st, &tail);
    if (rc != SQLITE_OK) return error_outcome(rc);
    if (!st) return EngineErrorOutcome{ErrorKind::Syntax, "empty statement"};
    std::unique_ptr<sqlite3_stmt, decltype(&sqlite3_finalize)> guard(st, &sqlite3_finalize);

    std::string_view rest(tail, static_cast<std::size_t>(sql.data() + sql.size() - tail));
    if (!text::trim(rest).empty()) {
      sqlite3_stmt* next = nullptr;
      sqlite3_prepare_v2(db_, rest.data(), static_cast<int>(rest.size()), &next, nullptr);
      bool another = next != nullptr;
      sqlite3_finalize(next);
      if (another) return EngineErrorOutcome{ErrorKind::Other, "multiple statements are not allowed"};
    }
    if (read_only_check && !sqlite3_stmt_readonly(st))
      return EngineErrorOutcome{ErrorKind::Other, "only read-only statements are allowed"};

    Deadline deadline{started + std::chrono::milliseconds(timeout_ms)};
    sqlite3_progress_handler(db_, 1000, &progress_cb, &deadline);
    struct Unhook {
      sqlite3* db;
      ~Unhook() { sqlite3_progress_handler(db, 0, nullptr, nullptr); }
    } unhook{db_};

    int n = sqlite3_column_count(st);
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.emplace_back(sqlite3_column_name(st, i));
    auto hints = column_hints(st);
    std::vector<Row> rows;
    while ((rc = sqlite3_step(st)) == SQLITE_ROW) rows.push_back(decode_row(st, hints));
    if (rc != SQLITE_DONE) {
      if (deadline.fired || rc == SQLITE_INTERRUPT) return TimeoutOutcome{timeout_ms};
      return error_outcome(rc);
    }
    double elapsed = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
    return OkOutcome{ResultSet(std::move(names), std::move(rows)), elapsed};
  }

  ExecutionOutcome error_outcome(int rc) {
    std::string msg = sqlite3_errmsg(db_);
    ErrorKind kind;
    switch (rc & 0xff) {
      case SQLITE_CONSTRAINT: kind = ErrorKind::Constraint; break;
      case SQLITE_CANTOPEN:
      case SQLITE_BUSY:
      case SQLITE_LOCKED:
      case SQLITE_IOERR: kind = ErrorKind::Connection; break;
      default: kind = classify_message(msg);
    }
    return EngineErrorOutcome{kind, std::move(msg)};
  }

  std::vector<std::optional<TypeKind>> column_hints(sqlite3_stmt* st) const {
    int n = sqlite3_column_count(st);
    std::vector<std::optional<TypeKind>> hints(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const char* table = sqlite3_column_table_name(st, i);
      const char* origin = sqlite3_column_origin_name(st, i);
      if (options_.type_hints && table && origin) {
        if (const TableInfo* t = options_.type_hints->find_table(table))
          if (const ColumnInfo* c = t->find_column(origin)) {
            hints[i] = c->type.kind;
            continue;
          }
      }
      if (const char* decl = sqlite3_column_decltype(st, i)) hints[i] = hinted_kind_from_decltype(decl);
    }
    return hints;
  }

  static Row decode_row(sqlite3_stmt* st, const std::vector<std::optional<TypeKind>>& hints) {
    Row row;
    row.reserve(hints.size());
    for (int i = 0; i < static_cast<int>(hints.size()); ++i) {
      auto hint = hints[static_cast<std::size_t>(i)];
      switch (sqlite3_column_type(st, i)) {
        case SQLITE_NULL: row.push_back(Cell::null()); break;
        case SQLITE_INTEGER: {
          auto v = sqlite3_column_int64(st, i);
          if (hint == TypeKind::Boolean && (v == 0 || v == 1))
            row.push_back(Cell::boolean(v == 1));
          else
            row.push_back(Cell::integer(v));
          break;
        }
        case SQLITE_FLOAT: row.push_back(Cell::floating(sqlite3_column_double(st, i))); break;
        case SQLITE_BLOB: {
          auto* p = static_cast<const char*>(sqlite3_column_blob(st, i));
          row.push_back(Cell::bytes(std::string(p ? p : "", static_cast<std::size_t>(sqlite3_column_bytes(st, i)))));
          break;
        }
        default: {
          std::string s(reinterpret_cast<const char*>(sqlite3_column_text(st, i)),
                        static_cast<std::size_t>(sqlite3_column_bytes(st, i)));
          row.push_back(decode_text(std::move(s), hint));
        }
      }
    }
    return row;
  }

  static Cell decode_text(std::string s, std::optional<TypeKind> hint) {
    if (hint == TypeKind::Date) {
      if (auto d = parse_iso_date(s)) return Cell::date(*d);
    } else if (hint == TypeKind::Timestamp) {
      if (auto t = parse_iso_timestamp(s)) return Cell::timestamp(*t);
      if (auto d = parse_iso_date(s)) return Cell::timestamp(midnight(*d));
    }
    return Cell::text(std::move(s));
  }

  static void bind(sqlite3_stmt* st, int at, const Cell& c) {
    switch (c.kind()) {
      case CellKind::Null: sqlite3_bind_null(st, at); break;
      case CellKind::Int: sqlite3_bind_int64(st, at, c.as_int()); break;
      case CellKind::Float: sqlite3_bind_double(st, at, c.as_float()); break;
      case CellKind::Bool: sqlite3_bind_int64(st, at, c.as_bool() ? 1 : 0); break;
      case CellKind::Decimal: bind_text(st, at, c.as_decimal().to_string()); break;
      case CellKind::Text: bind_text(st, at, c.as_text()); break;
      case CellKind::Date: bind_text(st, at, format_date(c.as_date())); break;
      case CellKind::Timestamp: bind_text(st, at, format_timestamp_sql(c.as_timestamp())); break;
      case CellKind::Bytes: {
        const auto& b = c.as_bytes().octets;
        sqlite3_bind_blob64(st, at, b.data(), b.size(), SQLITE_TRANSIENT);
        break;
      }
    }
  }

  static void bind_text(sqlite3_stmt* st, int at, const std::string& s) {
    sqlite3_bind_text64(st, at, s.data(), s.size(), SQLITE_TRANSIENT, SQLITE_UTF8);
  }

  Dialect dialect_;
  fs::path file_;
  ConnectOptions options_;
  sqlite3* db_ = nullptr;
};

}  // namespace

namespace detail {

std::unique_ptr<Session> open_sqlite(const Dialect& dialect, const Dsn& dsn, const ConnectOptions& options) {
  if (dialect == Dialect::quirk()) {
    // A quirk DSN always names a directory holding one file per namespace.
    if (options.ns.empty()) throw ConfigError("quirk sessions need a namespace");
    std::error_code ec;
    if (!options.read_only) fs::create_directories(dsn.path, ec);
    return std::make_unique<SqliteSession>(dialect, fs::path(dsn.path) / (options.ns + ".sqlite"), options);
  }
  return std::make_unique<SqliteSession>(dialect, sqlite_file_for(dsn.path, options.ns), options);
}

}  // namespace detail

}  // namespace poly::adapters
