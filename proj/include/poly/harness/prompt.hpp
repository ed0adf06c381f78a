#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "poly/core/benchmark.hpp"
#include "poly/core/dialect.hpp"

namespace poly::harness {

/// Five syntax reminders for one dialect, injected into the system prompt.
struct DialectGuidelines {
  Dialect dialect;
  std::array<std::string, 5> items;
  bool operator==(const DialectGuidelines&) const = default;
};

/// One guideline per non-empty line; `#` lines are comments. Throws
/// ConfigError unless exactly five remain.
DialectGuidelines parse_guidelines(const Dialect& dialect, std::string_view text);
/// `<data_dir>/guidelines/<dialect>.txt`.
DialectGuidelines load_guidelines(const Dialect& dialect, const std::filesystem::path& data_dir);

/// Shipped data directory; `POLY_DATA_DIR` overrides the built-in path.
std::filesystem::path default_data_dir();
/// `<data_dir>/prompt_header.txt` without its comment lines.
std::string load_prompt_header(const std::filesystem::path& data_dir);

// "PostgreSQL", "MySQL", ...; extension dialects keep their id.
std::string display_name(const Dialect& dialect);

struct Prompt {
  std::string system;
  std::string user;
  bool operator==(const Prompt&) const = default;
};

/// system = header + guidelines + DDL; user = question, evidence when
/// present, and the single-query directive.
Prompt build_prompt(const Example& example, const std::string& ddl, const DialectGuidelines& guidelines,
                    const std::string& header);

/// SQL from a model completion: the first fenced block (language tag
/// dropped), else everything from the first SELECT/WITH word. Trailing
/// semicolons and surrounding whitespace are removed. Throws
/// ExtractionError when nothing SQL-like is found.
std::string extract_sql(std::string_view completion);

}  // namespace poly::harness
