#include "poly/core/benchmark.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "poly/core/errors.hpp"

namespace poly {

const Example* BenchmarkSpec::find(std::int64_t id) const {
  for (const auto& e : examples)
    if (e.id == id) return &e;
  return nullptr;
}

BenchmarkFormat parse_benchmark_format(std::string_view s) {
  if (s == "spider_json" || s == "spider") return BenchmarkFormat::SpiderJson;
  if (s == "bird_json" || s == "bird") return BenchmarkFormat::BirdJson;
  throw ParseError("unknown benchmark format '" + std::string(s) + "'");
}

namespace {

std::string required_string(const nlohmann::json& obj, std::size_t index, const std::vector<const char*>& keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it == obj.end() || it->is_null()) continue;
    if (!it->is_string()) throw SchemaError(fmt::format("{} is not a string at index {}", k, index));
    return it->get<std::string>();
  }
  throw SchemaError(fmt::format("{} missing at index {}", *keys.begin(), index));
}

}  // namespace

BenchmarkSpec parse_benchmark(std::string_view bytes, BenchmarkFormat format, std::string name,
                              const std::filesystem::path& registry_root, std::string_view db_ext) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    // Count complete top-level elements before the failure to name the index.
    std::size_t depth = 0, index = 0;
    bool in_str = false, esc = false;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, bytes.size()); ++i) {
      char c = bytes[i];
      if (in_str) {
        if (esc) esc = false;
        else if (c == '\\') esc = true;
        else if (c == '"') in_str = false;
        continue;
      }
      if (c == '"') in_str = true;
      else if (c == '[' || c == '{') ++depth;
      else if (c == ']' || c == '}') --depth;
      else if (c == ',' && depth == 1) ++index;
    }
    throw ParseError(fmt::format("malformed JSON at element index {}: {}", index, e.what()));
  }
  if (!doc.is_array()) throw ParseError("benchmark must be a JSON array");

  // Both layouts share the same keys; BIRD spells the gold query `SQL`.
  const std::vector<const char*> gold_keys =
      format == BenchmarkFormat::BirdJson ? std::vector<const char*>{"SQL", "query"} : std::vector<const char*>{"query", "SQL"};
  BenchmarkSpec spec;
  spec.name = std::move(name);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& el = doc[i];
    if (!el.is_object()) throw ParseError(fmt::format("element at index {} is not an object", i));
    Example ex;
    ex.id = static_cast<std::int64_t>(i);
    ex.question = required_string(el, i, {"question"});
    ex.gold_sql = required_string(el, i, gold_keys);
    if (ex.gold_sql.empty()) throw SchemaError(fmt::format("empty gold query at index {}", i));
    ex.db_id = required_string(el, i, {"db_id"});
    if (auto it = el.find("evidence"); it != el.end() && it->is_string() && !it->get<std::string>().empty())
      ex.evidence = it->get<std::string>();
    spec.db_registry.emplace(ex.db_id, registry_root / (ex.db_id + std::string(db_ext)));
    spec.examples.push_back(std::move(ex));
  }
  return spec;
}

BenchmarkSpec load_benchmark(const std::filesystem::path& file, BenchmarkFormat format, std::string name,
                             const std::filesystem::path& registry_root, std::string_view db_ext) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read benchmark file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_benchmark(buf.str(), format, std::move(name), registry_root, db_ext);
}

std::vector<std::string> validate_benchmark(const BenchmarkSpec& spec, const std::filesystem::path& registry_root,
                                            std::string_view db_ext) {
  std::vector<std::string> issues;
  if (spec.examples.empty()) issues.push_back("benchmark has no examples");
  std::set<std::int64_t> ids;
  std::set<std::int64_t> reported;
  for (const auto& e : spec.examples) {
    if (!ids.insert(e.id).second && reported.insert(e.id).second) issues.push_back(fmt::format("duplicate id {}", e.id));
  }
  std::set<std::string> checked;
  for (const auto& e : spec.examples) {
    if (!checked.insert(e.db_id).second) continue;
    auto path = registry_root / (e.db_id + std::string(db_ext));
    if (!std::filesystem::is_regular_file(path))
      issues.push_back(fmt::format("database '{}' not found at {}", e.db_id, path.string()));
  }
  return issues;
}

}  // namespace poly
