#include "poly/harness/prompt.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include "poly/core/errors.hpp"

namespace poly::harness {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string read_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read {}", file.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Non-empty, non-comment lines, trimmed.
std::vector<std::string> content_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    auto line = trim(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (!line.empty() && line.front() != '#') out.emplace_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) return false;
  return true;
}

// Position of the first standalone SELECT or WITH word.
std::size_t first_query_word(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isalpha(static_cast<unsigned char>(s[i])) || (i > 0 && word_char(s[i - 1]))) continue;
    std::size_t j = i;
    while (j < s.size() && word_char(s[j])) ++j;
    auto w = s.substr(i, j - i);
    if (iequals(w, "select") || iequals(w, "with")) return i;
    i = j;
  }
  return std::string_view::npos;
}

std::string finish(std::string_view sql) {
  sql = trim(sql);
  while (!sql.empty() && sql.back() == ';') sql = trim(sql.substr(0, sql.size() - 1));
  return std::string(sql);
}

}  // namespace

DialectGuidelines parse_guidelines(const Dialect& dialect, std::string_view text) {
  auto lines = content_lines(text);
  if (lines.size() != 5)
    throw ConfigError(fmt::format("guidelines for {} must have exactly 5 entries, found {}", dialect.id(), lines.size()));
  DialectGuidelines g{dialect, {}};
  for (std::size_t i = 0; i < 5; ++i) g.items[i] = std::move(lines[i]);
  return g;
}

DialectGuidelines load_guidelines(const Dialect& dialect, const std::filesystem::path& data_dir) {
  auto file = data_dir / "guidelines" / (dialect.id() + ".txt");
  if (!std::filesystem::exists(file))
    throw ConfigError(fmt::format("no syntax guidelines for dialect {} (expected {})", dialect.id(), file.string()));
  return parse_guidelines(dialect, read_file(file));
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("POLY_DATA_DIR"); env && *env) return env;
  return POLY_DATA_DIR;
}

std::string load_prompt_header(const std::filesystem::path& data_dir) {
  auto text = read_file(data_dir / "prompt_header.txt");
  std::string out;
  for (const auto& line : content_lines(text)) {
    if (!out.empty()) out += '\n';
    out += line;
  }
  if (out.empty()) throw ConfigError("prompt header is empty");
  return out;
}

std::string display_name(const Dialect& dialect) {
  const auto& id = dialect.id();
  if (id == "postgres") return "PostgreSQL";
  if (id == "mysql") return "MySQL";
  if (id == "clickhouse") return "ClickHouse";
  if (id == "snowflake") return "Snowflake";
  if (id == "bigquery") return "BigQuery";
  if (id == "sqlite" || id == "quirk") return "SQLite";
  return id;
}

Prompt build_prompt(const Example& example, const std::string& ddl, const DialectGuidelines& guidelines,
                    const std::string& header) {
  const auto name = display_name(guidelines.dialect);
  std::string head;
  for (std::size_t pos = 0;;) {
    auto at = header.find("{dialect}", pos);
    head.append(header, pos, at == std::string::npos ? std::string::npos : at - pos);
    if (at == std::string::npos) break;
    head += name;
    pos = at + 9;
  }

  Prompt p;
  p.system = head + fmt::format("\n\n{} syntax guidelines:\n", name);
  for (std::size_t i = 0; i < guidelines.items.size(); ++i) p.system += fmt::format("{}. {}\n", i + 1, guidelines.items[i]);
  p.system += "\nDatabase schema:\n" + ddl;
  if (!ddl.empty() && ddl.back() != '\n') p.system += '\n';

  p.user = "Question: " + example.question + "\n";
  if (example.evidence && !trim(*example.evidence).empty()) p.user += "Evidence: " + *example.evidence + "\n";
  p.user += fmt::format("\nAnswer with a single {} SQL query and nothing else.", name);
  return p;
}

std::string extract_sql(std::string_view completion) {
  if (auto open = completion.find("```"); open != std::string_view::npos) {
    auto body = completion.substr(open + 3);
    auto close = body.find("```");
    if (close != std::string_view::npos) body = body.substr(0, close);
    // A fence line holding one bare word is a language tag.
    auto nl = body.find('\n');
    if (nl != std::string_view::npos) {
      auto tag = trim(body.substr(0, nl));
      bool bare = true;
      for (char c : tag) bare &= std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
      if (bare && !iequals(tag, "select") && !iequals(tag, "with")) body = body.substr(nl + 1);
    }
    auto sql = finish(body);
    if (sql.empty()) throw ExtractionError("the completion's code block is empty");
    return sql;
  }
  auto at = first_query_word(completion);
  if (at == std::string_view::npos) throw ExtractionError("the completion contains no SELECT or WITH query");
  auto sql = finish(completion.substr(at));
  return sql;
}

}  // namespace poly::harness
