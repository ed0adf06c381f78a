#include "sql_scan.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "poly/core/text.hpp"

namespace poly::gap::detail {

namespace {

bool word_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

std::string quoted_body(std::string_view sql, std::size_t& i, char close) {
  std::string out;
  ++i;
  while (i < sql.size()) {
    if (sql[i] == close) {
      if (i + 1 < sql.size() && sql[i + 1] == close && close != ']') {
        out.push_back(close);
        i += 2;
        continue;
      }
      ++i;
      return out;
    }
    out.push_back(sql[i++]);
  }
  return out;
}

}  // namespace

std::vector<Token> scan_sql(std::string_view sql) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](Tok k, std::string t) {
    auto lower = text::to_lower(t);
    out.push_back({k, std::move(t), std::move(lower)});
  };
  while (i < sql.size()) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
      while (i < sql.size() && sql[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
      auto end = sql.find("*/", i + 2);
      i = end == std::string_view::npos ? sql.size() : end + 2;
    } else if (c == '\'') {
      push(Tok::String, quoted_body(sql, i, '\''));
    } else if (c == '"' || c == '`') {
      push(Tok::Quoted, quoted_body(sql, i, c));
    } else if (c == '[') {
      push(Tok::Quoted, quoted_body(sql, i, ']'));
    } else if (word_start(c)) {
      std::size_t s = i;
      while (i < sql.size() && word_char(sql[i])) ++i;
      push(Tok::Word, std::string(sql.substr(s, i - s)));
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t s = i;
      while (i < sql.size() && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '.')) ++i;
      push(Tok::Number, std::string(sql.substr(s, i - s)));
    } else {
      push(Tok::Punct, std::string(1, c));
      ++i;
    }
  }
  return out;
}

DdlTables tables_in_ddl(std::string_view ddl) {
  DdlTables out;
  auto toks = scan_sql(ddl);
  auto is_name = [](const Token& t) { return t.kind == Tok::Word || t.kind == Tok::Quoted; };
  for (std::size_t i = 0; i + 2 < toks.size(); ++i) {
    if (!(toks[i].kind == Tok::Word && toks[i].lower == "create" && toks[i + 1].lower == "table")) continue;
    std::size_t j = i + 2;
    if (j + 2 < toks.size() && toks[j].lower == "if" && toks[j + 1].lower == "not" && toks[j + 2].lower == "exists") j += 3;
    if (j >= toks.size() || !is_name(toks[j])) continue;
    // schema-qualified names keep the last part
    while (j + 2 < toks.size() && toks[j + 1].text == "." && is_name(toks[j + 2])) j += 2;
    out.tables.push_back(toks[j].lower);
    ++j;
    if (j >= toks.size() || toks[j].text != "(") continue;
    int depth = 0;
    bool element_start = true;
    for (++j; j < toks.size(); ++j) {
      const auto& t = toks[j];
      if (t.kind == Tok::Punct && t.text == "(") {
        ++depth;
      } else if (t.kind == Tok::Punct && t.text == ")") {
        if (depth-- == 0) break;
      } else if (depth == 0 && t.kind == Tok::Punct && t.text == ",") {
        element_start = true;
        continue;
      } else if (depth == 0 && element_start && is_name(t)) {
        static const std::set<std::string> clauses = {"primary", "foreign", "constraint", "unique", "check", "key", "index"};
        if (t.kind == Tok::Quoted || !clauses.count(t.lower)) out.columns.push_back(t.lower);
      }
      element_start = false;
    }
  }
  std::sort(out.columns.begin(), out.columns.end());
  out.columns.erase(std::unique(out.columns.begin(), out.columns.end()), out.columns.end());
  return out;
}

bool is_keyword(std::string_view w) {
  static const std::set<std::string, std::less<>> words = {
      "select", "from", "where", "group", "by", "order", "having", "limit", "offset", "fetch", "first", "next",
      "rows", "row", "only", "join", "inner", "left", "right", "full", "outer", "cross", "natural", "on",
      "using", "as", "and", "or", "not", "in", "is", "null", "like", "ilike", "glob", "between", "exists", "case",
      "when", "then", "else", "end", "distinct", "all", "any", "some", "union", "intersect", "except", "minus",
      "with", "recursive", "asc", "desc", "nulls", "last", "true", "false", "cast", "interval", "over",
      "partition", "window", "range", "unbounded", "preceding", "following", "current", "filter", "within",
      "lateral", "escape", "collate", "similar", "to", "at", "time", "zone", "local", "values", "default",
      "unnest", "qualify", "pivot", "unpivot", "rollup", "cube", "grouping", "sets", "ties", "percent",
      "year", "month", "day", "hour", "minute", "second", "week", "quarter", "dow", "doy", "epoch",
      "millisecond", "microsecond", "isodow", "isoyear", "dayofweek", "dayofyear", "date", "timestamp",
      "datetime", "integer", "int", "bigint", "smallint", "int64", "float", "float64", "double", "precision",
      "real", "numeric", "decimal", "number", "text", "varchar", "char", "character", "string", "boolean",
      "bool", "signed", "unsigned", "varying", "current_date", "current_timestamp", "current_time", "now",
      "localtimestamp", "localtime", "sql_calc_found_rows", "straight_join", "separator", "binary", "bytea",
      "blob", "json", "jsonb", "array", "struct", "nullable", "final", "sample", "settings", "format"};
  return words.count(w) > 0;
}

}  // namespace poly::gap::detail
