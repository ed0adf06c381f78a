#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poly/core/dialect.hpp"

namespace poly {

struct Example {
  std::int64_t id = 0;
  std::string question;
  std::string gold_sql;
  std::string db_id;
  std::optional<std::string> evidence;
  bool operator==(const Example&) const = default;
};

struct BenchmarkSpec {
  std::string name;
  Dialect source_dialect = Dialect::sqlite();
  std::vector<Example> examples;
  // db_id -> source database file
  std::map<std::string, std::filesystem::path> db_registry;

  const Example* find(std::int64_t id) const;
  bool operator==(const BenchmarkSpec&) const = default;
};

enum class BenchmarkFormat { SpiderJson, BirdJson };

BenchmarkFormat parse_benchmark_format(std::string_view text);

/// Parses a Spider/BIRD style JSON array. Ids are positional. The registry
/// maps each db_id to `<registry_root>/<db_id><db_ext>`.
/// Throws ParseError (malformed JSON, element index in message) or
/// SchemaError (missing key).
BenchmarkSpec parse_benchmark(std::string_view bytes, BenchmarkFormat format, std::string name = "benchmark",
                              const std::filesystem::path& registry_root = {},
                              std::string_view db_ext = ".sqlite");

BenchmarkSpec load_benchmark(const std::filesystem::path& file, BenchmarkFormat format, std::string name,
                             const std::filesystem::path& registry_root, std::string_view db_ext = ".sqlite");

/// Issues as human-readable strings; empty means valid.
std::vector<std::string> validate_benchmark(const BenchmarkSpec& spec, const std::filesystem::path& registry_root,
                                            std::string_view db_ext = ".sqlite");

}  // namespace poly
