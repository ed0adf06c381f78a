#include <fmt/format.h>
#include <sqlite3.h>

#include <algorithm>
#include <charconv>
#include <functional>

#include "internal.hpp"
#include "poly/core/errors.hpp"
#include "poly/core/temporal.hpp"
#include "poly/core/text.hpp"
#include "poly/migration/migration.hpp"

namespace poly::migration {

namespace detail {

DeclaredType classify_declared(std::string_view declared) {
  auto d = text::to_upper(declared);
  auto has = [&](const char* s) { return d.find(s) != std::string::npos; };
  // SQLite's own affinity order comes first so a column is never read
  // differently from how the engine stored it.
  if (has("INT")) return {Declared::Integer};
  if (has("CHAR") || has("CLOB") || has("TEXT")) return {Declared::Text};
  if (has("BLOB") || text::trim(d).empty()) return {Declared::Untyped};
  if (has("REAL") || has("FLOA") || has("DOUB")) return {Declared::Float};
  if (has("BOOL")) return {Declared::Boolean};
  if (has("DATETIME") || has("TIMESTAMP")) return {Declared::Timestamp};
  if (has("DATE")) return {Declared::Date};
  if (has("DEC") || has("NUMERIC") || has("NUMBER")) {
    DeclaredType out{Declared::Decimal};
    auto open = d.find('(');
    if (open != std::string::npos) {
      auto close = d.find(')', open);
      auto args = text::split(d.substr(open + 1, close == std::string::npos ? std::string::npos : close - open - 1), ',');
      auto num = [](std::string_view s) {
        s = text::trim(s);
        int v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        return ec == std::errc{} && p == s.data() + s.size() ? v : -1;
      };
      int p = args.size() >= 1 ? num(args[0]) : -1;
      int s = args.size() >= 2 ? num(args[1]) : 0;
      if (p > 0 && s >= 0 && s <= p) {
        out.precision = p;
        out.scale = s;
      }
    }
    return out;
  }
  return {Declared::Untyped};
}

namespace {

std::optional<TypeKind> definite_kind(Declared d) {
  switch (d) {
    case Declared::Integer: return TypeKind::Integer;
    case Declared::Text: return TypeKind::Text;
    case Declared::Float: return TypeKind::Float;
    case Declared::Boolean: return TypeKind::Boolean;
    case Declared::Decimal: return TypeKind::Decimal;
    default: return std::nullopt;
  }
}

}  // namespace

void describe_changes(const SchemaSnapshot& inferred, std::vector<std::string>& promoted,
                      std::vector<std::string>& widened) {
  for (const auto& t : inferred.tables)
    for (const auto& c : t.columns) {
      auto kind = c.type.kind;
      auto label = t.name + "." + c.name;
      auto declared = classify_declared(c.declared_type);
      if (kind == TypeKind::Date || kind == TypeKind::Timestamp) {
        promoted.push_back(label);
      } else if (auto want = definite_kind(declared.cls); want && *want != kind) {
        widened.push_back(label);
      }
    }
}

}  // namespace detail

namespace {

using detail::Declared;

class Db {
 public:
  explicit Db(const std::filesystem::path& file) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(file, ec))
      throw ConnectionError(fmt::format("cannot open {}: no such file", file.string()));
    if (sqlite3_open_v2(file.c_str(), &db_, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
      std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
      sqlite3_close(db_);
      throw ConnectionError(fmt::format("cannot open {}: {}", file.string(), msg));
    }
    // Surfaces "file is not a database" here rather than mid-migration.
    query("SELECT count(*) FROM sqlite_master", [](sqlite3_stmt*) {});
  }
  ~Db() { sqlite3_close(db_); }
  Db(const Db&) = delete;
  Db& operator=(const Db&) = delete;

  void query(const std::string& sql, const std::function<void(sqlite3_stmt*)>& on_row) {
    sqlite3_stmt* st = nullptr;
    if (sqlite3_prepare_v2(db_, sql.c_str(), -1, &st, nullptr) != SQLITE_OK)
      throw ConnectionError(fmt::format("catalog query failed: {}", sqlite3_errmsg(db_)));
    int rc;
    while ((rc = sqlite3_step(st)) == SQLITE_ROW) on_row(st);
    std::string msg = rc == SQLITE_DONE ? "" : sqlite3_errmsg(db_);
    sqlite3_finalize(st);
    if (!msg.empty()) throw ConnectionError(fmt::format("catalog query failed: {}", msg));
  }

 private:
  sqlite3* db_ = nullptr;
};

std::string col_text(sqlite3_stmt* st, int i) {
  auto* p = sqlite3_column_text(st, i);
  return p ? reinterpret_cast<const char*>(p) : "";
}

std::string q(std::string_view name) {
  std::string out = "\"";
  for (char c : name) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

LogicalType provisional(const detail::DeclaredType& d) {
  switch (d.cls) {
    case Declared::Integer: return LogicalType::of(TypeKind::Integer);
    case Declared::Float: return LogicalType::of(TypeKind::Float);
    case Declared::Boolean: return LogicalType::of(TypeKind::Boolean);
    case Declared::Decimal: return LogicalType::decimal(d.precision, d.scale);
    default: return LogicalType::of(TypeKind::Text);
  }
}

struct StorageStats {
  std::int64_t integer = 0, real = 0, text = 0, blob = 0;
  std::int64_t non_null() const { return integer + real + text + blob; }
};

StorageStats storage_of(Db& db, const std::string& table, const std::string& column) {
  StorageStats s;
  db.query(fmt::format("SELECT typeof({0}), COUNT(*) FROM {1} WHERE {0} IS NOT NULL GROUP BY 1", q(column), q(table)),
           [&](sqlite3_stmt* st) {
             auto k = col_text(st, 0);
             auto n = sqlite3_column_int64(st, 1);
             if (k == "integer") s.integer = n;
             else if (k == "real") s.real = n;
             else if (k == "text") s.text = n;
             else if (k == "blob") s.blob = n;
           });
  return s;
}

// How the text values of a column parse; every value is checked, the
// sample only decides whether the full pass is worth running.
struct TemporalShape {
  bool all_date = true;       // every value is YYYY-MM-DD
  bool all_timestamp = true;  // every value has a time part
  bool all_either = true;
};

std::optional<TemporalShape> temporal_shape(Db& db, const std::string& table, const std::string& column,
                                            std::size_t sample_limit) {
  auto scan = [&](const std::string& sql) {
    TemporalShape shape;
    std::int64_t seen = 0;
    db.query(sql, [&](sqlite3_stmt* st) {
      ++seen;
      if (sqlite3_column_type(st, 0) != SQLITE_TEXT) {
        shape.all_date = shape.all_timestamp = shape.all_either = false;
        return;
      }
      auto v = col_text(st, 0);
      bool is_date = parse_iso_date(v).has_value();
      bool is_ts = !is_date && parse_iso_timestamp(v, false).has_value();
      shape.all_date &= is_date;
      shape.all_timestamp &= is_ts;
      shape.all_either &= is_date || is_ts;
    });
    return std::make_pair(shape, seen);
  };
  auto base = fmt::format("SELECT {0} FROM {1} WHERE {0} IS NOT NULL", q(column), q(table));
  auto [sample, seen] = scan(fmt::format("{} LIMIT {}", base, sample_limit));
  if (seen == 0 || !sample.all_either) return std::nullopt;
  return scan(base).first;
}

LogicalType by_storage(const StorageStats& s) {
  if (s.non_null() == 0) return LogicalType::of(TypeKind::Text);
  if (s.text || (s.blob && (s.integer || s.real))) return LogicalType::of(TypeKind::Text);
  if (s.blob) return LogicalType::of(TypeKind::Bytes);
  if (s.real) return LogicalType::of(TypeKind::Float);
  return LogicalType::of(TypeKind::Integer);
}

int digits_of(std::int64_t v) {
  auto s = std::to_string(v);
  return static_cast<int>(s.size()) - (v < 0 ? 1 : 0);
}

}  // namespace

SchemaSnapshot introspect_schema(const std::filesystem::path& file) {
  Db db(file);
  SchemaSnapshot snap;
  std::vector<std::string> tables;
  db.query("SELECT name, sql FROM sqlite_master WHERE type = 'table' AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' "
           "ORDER BY name",
           [&](sqlite3_stmt* st) {
             auto sql = col_text(st, 1);
             if (text::istarts_with(text::trim(sql), "CREATE VIRTUAL")) return;
             tables.push_back(col_text(st, 0));
           });
  for (const auto& name : tables) {
    TableInfo t;
    t.name = name;
    std::vector<std::pair<int, std::string>> pk;
    db.query(fmt::format("PRAGMA table_info({})", q(name)), [&](sqlite3_stmt* st) {
      ColumnInfo c;
      c.name = col_text(st, 1);
      c.declared_type = col_text(st, 2);
      c.type = provisional(detail::classify_declared(c.declared_type));
      if (int k = sqlite3_column_int(st, 5); k > 0) pk.emplace_back(k, c.name);
      t.columns.push_back(std::move(c));
    });
    if (!pk.empty()) {
      std::sort(pk.begin(), pk.end());
      t.primary_key.emplace();
      for (auto& [_, c] : pk) t.primary_key->push_back(c);
    }
    std::map<int, ForeignKey> fks;
    db.query(fmt::format("PRAGMA foreign_key_list({})", q(name)), [&](sqlite3_stmt* st) {
      auto& fk = fks[sqlite3_column_int(st, 0)];
      fk.ref_table = col_text(st, 2);
      fk.columns.push_back(col_text(st, 3));
      if (sqlite3_column_type(st, 4) != SQLITE_NULL) fk.ref_columns.push_back(col_text(st, 4));
    });
    for (auto& [_, fk] : fks) t.foreign_keys.push_back(std::move(fk));
    db.query(fmt::format("SELECT COUNT(*) FROM {}", q(name)),
             [&](sqlite3_stmt* st) { snap.row_counts[name] = sqlite3_column_int64(st, 0); });
    snap.tables.push_back(std::move(t));
  }
  // Foreign keys that name no columns point at the parent's primary key.
  for (auto& t : snap.tables)
    for (auto& fk : t.foreign_keys)
      if (fk.ref_columns.empty())
        if (const TableInfo* parent = snap.find_table(fk.ref_table); parent && parent->primary_key)
          fk.ref_columns = *parent->primary_key;
  snap.check_unique_names();
  return snap;
}

SchemaSnapshot infer_logical_types(const std::filesystem::path& file, const SchemaSnapshot& snapshot,
                                   std::size_t sample_limit) {
  if (sample_limit == 0) throw ConfigError("sample_limit must be positive");
  Db db(file);
  SchemaSnapshot out = snapshot;
  for (auto& t : out.tables) {
    for (auto& c : t.columns) {
      auto declared = detail::classify_declared(c.declared_type);
      auto stats = storage_of(db, t.name, c.name);
      bool text_only = stats.text > 0 && stats.text == stats.non_null();
      auto temporal = [&]() { return text_only ? temporal_shape(db, t.name, c.name, sample_limit) : std::nullopt; };
      LogicalType type;
      switch (declared.cls) {
        case Declared::Integer:
          type = stats.text || stats.blob ? LogicalType::of(TypeKind::Text)
                 : stats.real             ? LogicalType::of(TypeKind::Float)
                                          : LogicalType::of(TypeKind::Integer);
          break;
        case Declared::Float:
          type = stats.text || stats.blob ? LogicalType::of(TypeKind::Text) : LogicalType::of(TypeKind::Float);
          break;
        case Declared::Boolean: {
          if (stats.text || stats.blob) {
            type = LogicalType::of(TypeKind::Text);
          } else if (stats.real) {
            type = LogicalType::of(TypeKind::Float);
          } else {
            std::int64_t other = 0;
            db.query(fmt::format("SELECT COUNT(*) FROM {1} WHERE typeof({0}) = 'integer' AND {0} NOT IN (0, 1)",
                                 q(c.name), q(t.name)),
                     [&](sqlite3_stmt* st) { other = sqlite3_column_int64(st, 0); });
            type = LogicalType::of(other ? TypeKind::Integer : TypeKind::Boolean);
          }
          break;
        }
        case Declared::Decimal: {
          if (stats.text || stats.blob) {
            type = LogicalType::of(TypeKind::Text);
          } else if (stats.real) {
            type = LogicalType::of(TypeKind::Float);
          } else {
            int p = declared.precision > 0 ? declared.precision : 38;
            int s = declared.precision > 0 ? declared.scale : 10;
            if (stats.integer) {
              int digits = 0;
              db.query(fmt::format("SELECT MIN({0}), MAX({0}) FROM {1}", q(c.name), q(t.name)), [&](sqlite3_stmt* st) {
                digits = std::max(digits_of(sqlite3_column_int64(st, 0)), digits_of(sqlite3_column_int64(st, 1)));
              });
              p = std::max(p, digits + s);
            }
            type = LogicalType::decimal(p, s);
          }
          break;
        }
        case Declared::Date:
        case Declared::Timestamp: {
          auto shape = temporal();
          if (shape && shape->all_date && declared.cls == Declared::Date)
            type = LogicalType::of(TypeKind::Date);
          else if (shape && shape->all_either)
            type = LogicalType::of(TypeKind::Timestamp);
          else
            type = by_storage(stats);
          break;
        }
        case Declared::Text:
        case Declared::Untyped: {
          type = declared.cls == Declared::Text ? LogicalType::of(TypeKind::Text) : by_storage(stats);
          if (type.kind == TypeKind::Text) {
            if (auto shape = temporal()) {
              if (shape->all_date) type = LogicalType::of(TypeKind::Date);
              else if (shape->all_timestamp) type = LogicalType::of(TypeKind::Timestamp);
            }
          }
          break;
        }
      }
      c.type = type;
    }
  }
  return out;
}

}  // namespace poly::migration
