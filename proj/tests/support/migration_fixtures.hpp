#pragma once

#include <sqlite3.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "poly/core/benchmark.hpp"
#include "support/fixtures.hpp"
#include "support/tempdir.hpp"

namespace poly::testing {


inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void run_sqlite_script(const std::string& db_path, const std::string& script) {
  sqlite3* db = nullptr;
  if (sqlite3_open(db_path.c_str(), &db) != SQLITE_OK) throw std::runtime_error("cannot open " + db_path);
  char* err = nullptr;
  int rc = sqlite3_exec(db, script.c_str(), nullptr, nullptr, &err);
  std::string msg = err ? err : "";
  sqlite3_free(err);
  sqlite3_close(db);
  if (rc != SQLITE_OK) throw std::runtime_error("script failed on " + db_path + ": " + msg);
}

/// Builds `<dir>/<name>.sqlite` from `fixtures/<rel>`.
inline std::string build_fixture_db(const std::filesystem::path& dir, const std::string& name, const std::string& rel) {
  auto path = (dir / (name + ".sqlite")).string();
  run_sqlite_script(path, slurp(fixture_path(rel)));
  return path;
}

/// The three migration fixtures: FK-violating rows, ISO-text dates, dirty mixed types.
struct MigrationFixtures {
  TempDir dir;
  std::vector<std::pair<std::string, std::string>> dbs;  // db_id, path

  MigrationFixtures() {
    for (const char* name : {"fk_dirty", "iso_dates", "mixed_types"})
      dbs.emplace_back(name, build_fixture_db(dir.path(), name, std::string("migration/") + name + ".sql"));
  }

  BenchmarkSpec benchmark(const std::string& name = "fixtures") const {
    BenchmarkSpec spec;
    spec.name = name;
    for (const auto& [id, path] : dbs) spec.db_registry[id] = path;
    return spec;
  }
};

struct WrongQuery {
  std::size_t example = 0;
  std::string sql;
};

/// Twelve hand-checked examples over two databases with PostgreSQL
/// equivalents and six deliberately wrong target queries.
struct MiniBenchmark {
  TempDir dir;
  BenchmarkSpec spec;
  std::vector<std::string> postgres;
  std::vector<WrongQuery> wrong_postgres;

  MiniBenchmark() {
    for (const char* db : {"shop", "library"}) build_fixture_db(dir.path(), db, std::string("mini/") + db + ".sql");
    spec = parse_benchmark(slurp(fixture_path("mini/benchmark.json")), BenchmarkFormat::SpiderJson, "mini",
                           dir.path());
    auto eq = nlohmann::json::parse(slurp(fixture_path("mini/equivalents.json")));
    postgres = eq.at("postgres").get<std::vector<std::string>>();
    for (const auto& w : eq.at("wrong_postgres"))
      wrong_postgres.push_back({w.at("example").get<std::size_t>(), w.at("sql").get<std::string>()});
  }
};

/// SQLite-dialect counterparts of the wrong target queries.
inline std::vector<WrongQuery> wrong_sqlite() {
  return {{0, "SELECT name FROM customers WHERE city = 'Bergen'"},
          {1, "SELECT SUM(paid) / COUNT(*) FROM orders"},
          {2, "SELECT c.name, SUM(o.amount) FROM customers c JOIN orders o ON o.customer_id = c.id GROUP BY c.name "
              "ORDER BY SUM(o.amount) ASC LIMIT 3"},
          {5, "SELECT id FROM orders WHERE customer_id IN (SELECT id FROM customers)"},
          {9, "SELECT title, year FROM books WHERE year <= 1950 ORDER BY year"},
          {11, "SELECT borrower, julianday(loaned_on) - julianday(returned_on) FROM loans WHERE returned_on IS NOT NULL"}};
}

}  // namespace poly::testing
