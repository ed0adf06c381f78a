#include <fmt/format.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "internal.hpp"
#include "poly/adapters/dsn.hpp"
#include "poly/adapters/pool.hpp"
#include "poly/comparator/kernels.hpp"
#include "poly/core/codec.hpp"
#include "poly/core/errors.hpp"
#include "poly/core/text.hpp"
#include "poly/migration/migration.hpp"

namespace poly::migration {

using adapters::quote_identifier;

namespace {

BigInt pow10(int n) { return boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(n)); }

Decimal rescale(const Decimal& d, int scale) {
  if (d.scale() == scale) return d;
  if (d.scale() < scale) return Decimal(d.unscaled() * pow10(scale - d.scale()), scale);
  BigInt div = pow10(d.scale() - scale);
  if (d.unscaled() % div != 0)
    throw MigrationError(fmt::format("{} does not fit scale {}", d.to_string(), scale));
  return Decimal(d.unscaled() / div, scale);
}

[[noreturn]] void no_fit(const Cell& c, const LogicalType& t) {
  throw MigrationError(fmt::format("cannot load {} value as {}", to_string(c.kind()), to_string(t.kind)));
}

// Text targets reject NUL and malformed UTF-8; such octets load as "\x<hex>".
std::string loadable_text(std::string s) {
  if (s.find('\0') == std::string::npos && text::valid_utf8(s)) return s;
  return "\\x" + text::hex_encode(s);
}

std::string as_text(const Cell& c) {
  switch (c.kind()) {
    case CellKind::Int: return std::to_string(c.as_int());
    case CellKind::Float: return text::format_double(c.as_float());
    case CellKind::Decimal: return c.as_decimal().to_string();
    case CellKind::Text: return loadable_text(c.as_text());
    case CellKind::Bool: return c.as_bool() ? "1" : "0";
    case CellKind::Date: return format_date(c.as_date());
    case CellKind::Timestamp: return format_timestamp_sql(c.as_timestamp());
    case CellKind::Bytes: return loadable_text(c.as_bytes().octets);
    case CellKind::Null: break;
  }
  return {};
}

}  // namespace

Cell coerce_cell(const Cell& c, const LogicalType& t) {
  if (c.is_null()) return c;
  switch (t.kind) {
    case TypeKind::Integer:
      switch (c.kind()) {
        case CellKind::Int: return c;
        case CellKind::Bool: return Cell::integer(c.as_bool() ? 1 : 0);
        case CellKind::Decimal: {
          auto d = c.as_decimal();
          try {
            d = rescale(d, 0);
          } catch (const MigrationError&) {
            no_fit(c, t);
          }
          if (d.unscaled() > INT64_MAX || d.unscaled() < INT64_MIN) no_fit(c, t);
          return Cell::integer(static_cast<std::int64_t>(d.unscaled()));
        }
        case CellKind::Float: {
          double v = c.as_float();
          if (std::trunc(v) != v || !(v >= -9.2e18 && v <= 9.2e18)) no_fit(c, t);
          return Cell::integer(static_cast<std::int64_t>(v));
        }
        default: no_fit(c, t);
      }
    case TypeKind::Float:
      switch (c.kind()) {
        case CellKind::Float: return c;
        case CellKind::Int: return Cell::floating(static_cast<double>(c.as_int()));
        case CellKind::Decimal: return Cell::floating(static_cast<double>(c.as_decimal().to_long_double()));
        case CellKind::Bool: return Cell::floating(c.as_bool() ? 1.0 : 0.0);
        case CellKind::Text:
          try {
            return Cell::floating(text::parse_double(text::trim(c.as_text())));
          } catch (const ParseError&) {
            no_fit(c, t);
          }
        default: no_fit(c, t);
      }
    case TypeKind::Decimal: {
      int scale = t.precision > 0 ? t.scale : 10;
      switch (c.kind()) {
        case CellKind::Decimal: return Cell::decimal(rescale(c.as_decimal(), scale));
        case CellKind::Int: return Cell::decimal(rescale(Decimal::from_int(c.as_int()), scale));
        case CellKind::Bool: return Cell::decimal(rescale(Decimal::from_int(c.as_bool() ? 1 : 0), scale));
        case CellKind::Float:
          if (!std::isfinite(c.as_float())) no_fit(c, t);
          return Cell::decimal(rescale(Decimal::parse(text::format_double(c.as_float())), scale));
        case CellKind::Text:
          try {
            return Cell::decimal(rescale(Decimal::parse(text::trim(c.as_text())), scale));
          } catch (const ParseError&) {
            no_fit(c, t);
          }
        default: no_fit(c, t);
      }
    }
    case TypeKind::Text: return Cell::text(as_text(c));
    case TypeKind::Boolean:
      switch (c.kind()) {
        case CellKind::Bool: return c;
        case CellKind::Int:
          if (c.as_int() == 0 || c.as_int() == 1) return Cell::boolean(c.as_int() == 1);
          no_fit(c, t);
        case CellKind::Text: {
          auto v = text::to_lower(text::trim(c.as_text()));
          if (v == "1" || v == "t" || v == "true") return Cell::boolean(true);
          if (v == "0" || v == "f" || v == "false") return Cell::boolean(false);
          no_fit(c, t);
        }
        default: no_fit(c, t);
      }
    case TypeKind::Date:
      switch (c.kind()) {
        case CellKind::Date: return c;
        case CellKind::Text:
          if (auto d = parse_iso_date(text::trim(c.as_text()))) return Cell::date(*d);
          no_fit(c, t);
        case CellKind::Timestamp: {
          auto day = std::chrono::floor<std::chrono::days>(c.as_timestamp().instant);
          if (day != c.as_timestamp().instant) no_fit(c, t);
          return Cell::date(Date{day});
        }
        default: no_fit(c, t);
      }
    case TypeKind::Timestamp:
      switch (c.kind()) {
        case CellKind::Timestamp: return c;
        case CellKind::Date: return Cell::timestamp(midnight(c.as_date()));
        case CellKind::Text: {
          auto s = text::trim(c.as_text());
          if (auto ts = parse_iso_timestamp(s)) return Cell::timestamp(*ts);
          if (auto d = parse_iso_date(s)) return Cell::timestamp(midnight(*d));
          no_fit(c, t);
        }
        default: no_fit(c, t);
      }
    case TypeKind::Bytes:
      if (c.kind() == CellKind::Bytes) return c;
      if (c.kind() == CellKind::Text) return Cell::bytes(c.as_text());
      no_fit(c, t);
  }
  no_fit(c, t);
}

std::string render_target_ddl(const SchemaSnapshot& snapshot, const Dialect& dialect, const TypeMappingTable& mapping,
                              DdlMode mode) {
  bool clickhouse = dialect == Dialect::clickhouse();
  auto qi = [&](std::string_view n) { return quote_identifier(dialect, n); };
  auto list = [&](const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + qi(names[i]);
    return out;
  };
  std::string out;
  for (const auto& t : snapshot.tables) {
    std::vector<std::string> parts;
    for (const auto& c : t.columns) parts.push_back(qi(c.name) + " " + mapping.render(c.type, dialect));
    std::vector<std::string> notes;
    if (mode == DdlMode::Prompt) {
      if (t.primary_key) notes.push_back("PRIMARY KEY (" + list(*t.primary_key) + ")");
      for (const auto& fk : t.foreign_keys) {
        std::string clause = "FOREIGN KEY (" + list(fk.columns) + ") REFERENCES " + qi(fk.ref_table);
        if (!fk.ref_columns.empty()) clause += " (" + list(fk.ref_columns) + ")";
        notes.push_back(clause);
      }
      // ClickHouse has no key constraints of this kind; keep them as comments.
      if (!clickhouse) parts.insert(parts.end(), notes.begin(), notes.end());
    }
    out += fmt::format("CREATE TABLE {} ({})", qi(t.name), fmt::join(parts, ", "));
    if (clickhouse) out += " ENGINE = MergeTree ORDER BY tuple()";
    out += ";\n";
    if (clickhouse)
      for (const auto& n : notes) out += "-- " + t.name + ": " + n + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> column_names(const TableInfo& t) {
  std::vector<std::string> out;
  for (const auto& c : t.columns) out.push_back(c.name);
  return out;
}

std::vector<LogicalType> column_types(const TableInfo& t) {
  std::vector<LogicalType> out;
  for (const auto& c : t.columns) out.push_back(c.type);
  return out;
}

void coerce_rows(std::vector<Row>& rows, const std::vector<LogicalType>& types) {
  for (auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = coerce_cell(row[i], types[i]);
}

}  // namespace

std::map<std::string, std::int64_t> transfer_data(adapters::Session& source, adapters::Session& target,
                                                  const SchemaSnapshot& snapshot, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  std::map<std::string, std::int64_t> loaded;
  for (const auto& t : snapshot.tables) {
    auto names = column_names(t);
    auto types = column_types(t);
    std::int64_t offset = 0;
    target.begin();
    try {
      source.scan_table(t.name, names, batch_size, [&](const std::vector<Row>& batch) {
        std::vector<Row> rows = batch;
        coerce_rows(rows, types);
        target.insert_rows(t.name, names, types, rows);
        offset += static_cast<std::int64_t>(rows.size());
      });
      target.commit();
    } catch (const std::exception& e) {
      try {
        target.rollback();
      } catch (...) {
      }
      throw MigrationError(fmt::format("loading {} failed in the batch at row {}: {}", t.name, offset, e.what()));
    }
    loaded[t.name] = offset;
  }
  return loaded;
}

bool TableReport::matches() const {
  if (source_rows != target_rows) return false;
  for (const auto& c : checksums)
    if (c.source != c.target) return false;
  return true;
}

bool MigrationReport::verified() const {
  return std::all_of(tables.begin(), tables.end(), [](const TableReport& t) { return t.matches(); });
}

bool MigrationSummary::all_verified() const {
  if (!failures.empty()) return false;
  for (const auto& [_, r] : reports)
    if (!r.verified()) return false;
  return true;
}

MigrationReport verify_migration(adapters::Session& source, adapters::Session& target, const SchemaSnapshot& snapshot) {
  MigrationReport report;
  report.dialect = target.dialect();
  report.snapshot = snapshot;
  for (const auto& t : snapshot.tables) {
    auto names = column_names(t);
    auto types = column_types(t);
    auto checksum = [&](adapters::Session& s) {
      std::vector<std::uint64_t> sums(names.size(), 0);
      s.scan_table(t.name, names, 10000, [&](const std::vector<Row>& batch) {
        std::vector<Row> rows = batch;
        coerce_rows(rows, types);
        cmp::accumulate_column_checksums(rows, sums);
      });
      return sums;
    };
    TableReport tr;
    tr.table = t.name;
    tr.source_rows = source.count_rows(t.name);
    tr.target_rows = target.count_rows(t.name);
    auto src = checksum(source);
    auto tgt = checksum(target);
    for (std::size_t i = 0; i < names.size(); ++i) tr.checksums.push_back({names[i], src[i], tgt[i]});
    report.tables.push_back(std::move(tr));
  }
  return report;
}

MigrationReport migrate_database(const std::string& benchmark_name, const std::string& db_id,
                                 const std::filesystem::path& source_file, const Dialect& dialect,
                                 const MigrationConfig& config) {
  auto started = std::chrono::steady_clock::now();
  auto inferred = std::make_shared<SchemaSnapshot>(
      infer_logical_types(source_file, introspect_schema(source_file), config.sample_limit));
  auto ddl = render_target_ddl(*inferred, dialect, config.mapping, DdlMode::Load);
  auto ns = adapters::namespace_for(benchmark_name, db_id);

  auto source = adapters::open_session(Dialect::sqlite(), "sqlite:" + source_file.string(),
                                       {.ns = "", .read_only = true, .type_hints = inferred});
  auto target = adapters::open_session(dialect, config.target_dsn, {.ns = ns, .type_hints = inferred});
  target->reset_namespace();
  target->exec_script(ddl);
  transfer_data(*source, *target, *inferred, config.batch_size);
  auto report = verify_migration(*source, *target, *inferred);
  report.db_id = db_id;
  report.target_namespace = ns;
  detail::describe_changes(*inferred, report.promoted, report.widened);
  report.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return report;
}

MigrationSummary migrate(const BenchmarkSpec& benchmark, const Dialect& dialect, const MigrationConfig& config) {
  config.mapping.validate();
  if (!config.mapping.covers(dialect)) throw ConfigError("type mapping does not cover dialect " + dialect.id());
  std::vector<std::string> ids;
  for (const auto& [id, _] : benchmark.db_registry) ids.push_back(id);

  MigrationSummary summary;
  for (const auto& ex : benchmark.examples)
    if (!benchmark.db_registry.count(ex.db_id))
      summary.failures[ex.db_id] = fmt::format("database '{}' is not in the registry", ex.db_id);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < ids.size();) {
      const auto& id = ids[i];
      try {
        auto report = migrate_database(benchmark.name, id, benchmark.db_registry.at(id), dialect, config);
        std::lock_guard lk(mu);
        summary.reports.emplace(id, std::move(report));
      } catch (const std::exception& e) {
        std::lock_guard lk(mu);
        summary.failures[id] = e.what();
      }
    }
  };
  std::size_t n = std::max<std::size_t>(1, std::min(config.parallelism, ids.size()));
  std::vector<std::thread> threads;
  for (std::size_t i = 1; i < n; ++i) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  return summary;
}

void to_json(nlohmann::json& j, const MigrationReport& r) {
  auto tables = nlohmann::json::array();
  for (const auto& t : r.tables) {
    auto sums = nlohmann::json::array();
    for (const auto& c : t.checksums)
      sums.push_back({{"column", c.column}, {"source", fmt::format("{:016x}", c.source)},
                      {"target", fmt::format("{:016x}", c.target)}});
    tables.push_back({{"table", t.table},
                      {"source_rows", t.source_rows},
                      {"target_rows", t.target_rows},
                      {"matches", t.matches()},
                      {"checksums", sums}});
  }
  j = {{"db_id", r.db_id},
       {"dialect", r.dialect},
       {"namespace", r.target_namespace},
       {"verified", r.verified()},
       {"elapsed_ms", r.elapsed_ms},
       {"promoted", r.promoted},
       {"widened", r.widened},
       {"tables", tables},
       {"snapshot", r.snapshot}};
}

void from_json(const nlohmann::json& j, MigrationReport& r) {
  auto hex = [](const nlohmann::json& v) { return std::stoull(v.get<std::string>(), nullptr, 16); };
  r.db_id = j.at("db_id").get<std::string>();
  r.dialect = j.at("dialect").get<Dialect>();
  r.target_namespace = j.at("namespace").get<std::string>();
  r.elapsed_ms = j.at("elapsed_ms").get<double>();
  r.promoted = j.at("promoted").get<std::vector<std::string>>();
  r.widened = j.at("widened").get<std::vector<std::string>>();
  r.snapshot = j.at("snapshot").get<SchemaSnapshot>();
  r.tables.clear();
  for (const auto& t : j.at("tables")) {
    TableReport tr;
    tr.table = t.at("table").get<std::string>();
    tr.source_rows = t.at("source_rows").get<std::int64_t>();
    tr.target_rows = t.at("target_rows").get<std::int64_t>();
    for (const auto& c : t.at("checksums"))
      tr.checksums.push_back({c.at("column").get<std::string>(), hex(c.at("source")), hex(c.at("target"))});
    r.tables.push_back(std::move(tr));
  }
}

void write_report(const std::filesystem::path& path, const MigrationReport& report) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << nlohmann::json(report).dump(2) << "\n";
}

MigrationReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in).get<MigrationReport>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace poly::migration
