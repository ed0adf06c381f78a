#include <fmt/format.h>

#include <algorithm>
#include <optional>
#include <set>

#include "poly/core/text.hpp"
#include "poly/gapscope/gapscope.hpp"
#include "sql_scan.hpp"

namespace poly::gap {

using detail::Tok;
using detail::Token;

namespace {

bool is_name(const Token& t) { return t.kind == Tok::Word || t.kind == Tok::Quoted; }
bool punct(const std::vector<Token>& ts, std::size_t i, const char* p) {
  return i < ts.size() && ts[i].kind == Tok::Punct && ts[i].text == p;
}
bool word(const std::vector<Token>& ts, std::size_t i, const char* w) {
  return i < ts.size() && ts[i].kind == Tok::Word && ts[i].lower == w;
}

// Double quotes delimit strings rather than identifiers in these dialects.
bool double_quote_is_string(const Dialect& d) { return d == Dialect::mysql() || d == Dialect::bigquery(); }

const std::set<std::string> kClauseEnd = {"where", "group", "order", "having", "limit", "union", "intersect",
                                          "except", "window", "qualify", "offset", "fetch", "on", "using"};

/// First identifier in `sql` that names no table, column, alias or CTE of
/// the target schema.
std::optional<std::string> unknown_reference(const GapError& g) {
  auto schema = detail::tables_in_ddl(g.schema_ddl);
  if (schema.tables.empty()) return std::nullopt;
  std::set<std::string> tables(schema.tables.begin(), schema.tables.end());
  std::set<std::string> columns(schema.columns.begin(), schema.columns.end());
  auto ts = detail::scan_sql(g.pred_sql);
  bool dq_string = double_quote_is_string(g.dialect);
  auto ident = [&](std::size_t i) { return i < ts.size() && ts[i].kind == Tok::Word ? !detail::is_keyword(ts[i].lower) : is_name(ts[i]); };

  // Pass 1: names the query itself defines, and positions of table references.
  std::set<std::string> defined;
  // CTE names: `name AS (` and `name(cols) AS (`
  for (std::size_t i = 0; i + 2 < ts.size(); ++i)
    if (is_name(ts[i]) && word(ts, i + 1, "as") && punct(ts, i + 2, "(")) defined.insert(ts[i].lower);
  auto after_expr = [&](std::size_t i) {
    if (i == 0) return false;
    const auto& prev = ts[i - 1];
    return (prev.kind == Tok::Word && !detail::is_keyword(prev.lower)) || prev.kind == Tok::Quoted ||
           prev.kind == Tok::Number || prev.kind == Tok::String || punct(ts, i - 1, ")");
  };
  std::vector<bool> table_pos(ts.size(), false);
  // FROM inside these calls is an argument separator, not a clause.
  static const std::set<std::string> from_args = {"extract", "substring", "trim", "position", "overlay"};
  std::vector<std::string> callee{""};
  std::vector<int> from_depth;  // stack of open FROM lists
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& t = ts[i];
    if (punct(ts, i, "(")) callee.push_back(i > 0 && ts[i - 1].kind == Tok::Word ? ts[i - 1].lower : "");
    if (punct(ts, i, ")")) {
      int depth = static_cast<int>(callee.size()) - 1;
      while (!from_depth.empty() && from_depth.back() >= depth) from_depth.pop_back();
      if (callee.size() > 1) callee.pop_back();
    }
    int depth = static_cast<int>(callee.size()) - 1;
    if (t.kind == Tok::Word && t.lower == "as" && i + 1 < ts.size() && is_name(ts[i + 1])) defined.insert(ts[i + 1].lower);
    if (is_name(t) && !(t.kind == Tok::Word && detail::is_keyword(t.lower)) && after_expr(i) &&
        !(i > 0 && punct(ts, i - 1, ".")) && (punct(ts, i + 1, ",") || word(ts, i + 1, "from")))
      defined.insert(t.lower);
    // `(subquery) x`, `count(*) n`: a bare name after a closing paren is an alias
    if (is_name(t) && !(t.kind == Tok::Word && detail::is_keyword(t.lower)) && i > 0 && punct(ts, i - 1, ")"))
      defined.insert(t.lower);
    bool clause_from = t.kind == Tok::Word && t.lower == "from" && !from_args.count(callee.back());
    bool opens = clause_from || (t.kind == Tok::Word && t.lower == "join");
    if (clause_from) from_depth.push_back(depth);
    if (t.kind == Tok::Word && kClauseEnd.count(t.lower) && !from_depth.empty() && from_depth.back() == depth)
      from_depth.pop_back();
    bool list_comma = punct(ts, i, ",") && !from_depth.empty() && from_depth.back() == depth;
    if ((opens || list_comma) && i + 1 < ts.size() && is_name(ts[i + 1]) && !punct(ts, i + 2, "(")) {
      std::size_t j = i + 1;
      while (punct(ts, j + 1, ".") && j + 2 < ts.size() && is_name(ts[j + 2])) {
        table_pos[j] = true;  // schema qualifier
        j += 2;
      }
      if (ts[j].kind == Tok::Word && detail::is_keyword(ts[j].lower) && !defined.count(ts[j].lower)) continue;
      table_pos[j] = true;
      std::size_t k = j + 1;
      if (word(ts, k, "as")) ++k;
      if (k < ts.size() && ident(k)) defined.insert(ts[k].lower);
    }
  }

  // Pass 2: check references.
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto& t = ts[i];
    if (!is_name(t)) continue;
    if (t.kind == Tok::Quoted && dq_string) continue;
    if (t.kind == Tok::Word && detail::is_keyword(t.lower)) continue;
    if (punct(ts, i + 1, "(")) continue;                  // function call
    if (i > 0 && word(ts, i - 1, "as")) continue;         // alias definition
    if (punct(ts, i + 1, ".")) continue;                  // qualifier
    if (table_pos[i]) {
      if (!tables.count(t.lower) && !defined.count(t.lower)) return t.text;
      continue;
    }
    if (defined.count(t.lower) || columns.count(t.lower)) continue;
    if (tables.count(t.lower) && !(i > 0 && punct(ts, i - 1, "."))) continue;
    return t.text;
  }
  return std::nullopt;
}

bool message_names_missing_object(const std::string& msg) {
  auto m = text::to_lower(msg);
  if (m.find("function") != std::string::npos) return false;
  for (const char* p : {"no such column", "no such table", "unknown column", "unknown table", "unknown identifier",
                        "missing columns", "invalid identifier", "unrecognized name", "doesn't exist",
                        "does not exist", "not found"})
    if (m.find(p) != std::string::npos) return true;
  return false;
}

// Tokens of the first top-level clause starting with `head`, up to the next clause keyword.
std::string clause(const std::vector<Token>& ts, const char* head, const char* second = nullptr) {
  int depth = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (punct(ts, i, "(")) ++depth;
    if (punct(ts, i, ")")) --depth;
    if (depth != 0 || !word(ts, i, head) || (second && !word(ts, i + 1, second))) continue;
    std::string out;
    int d = 0;
    for (std::size_t j = i + (second ? 2 : 1); j < ts.size(); ++j) {
      if (punct(ts, j, "(")) ++d;
      if (punct(ts, j, ")") && --d < 0) break;
      if (d == 0 && ts[j].kind == Tok::Word && kClauseEnd.count(ts[j].lower) && ts[j].lower != "on" &&
          ts[j].lower != "using")
        break;
      if (d == 0 && punct(ts, j, ";")) break;
      out += ts[j].lower + " ";
    }
    return out;
  }
  return {};
}

std::multiset<std::string> aggregates(const std::vector<Token>& ts) {
  static const std::set<std::string> names = {"count", "sum", "avg", "min", "max", "total", "group_concat",
                                              "string_agg", "array_agg", "listagg", "median", "stddev",
                                              "variance", "any_value", "countif", "count_distinct", "uniq"};
  std::multiset<std::string> out;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i)
    if (ts[i].kind == Tok::Word && names.count(ts[i].lower) && punct(ts, i + 1, "(")) out.insert(ts[i].lower);
  return out;
}

std::string clip(std::string s, std::size_t n = 200) {
  if (s.size() > n) s = s.substr(0, n) + "...";
  return s;
}

}  // namespace

Classification RuleJudge::classify(const GapError& g) const {
  Classification c;
  c.question_id = g.example_id;
  c.model_id = g.model_id;
  c.dialect = g.dialect;
  c.judge = name();
  auto set = [&](ErrorCategory cat, std::string why, std::string evidence) {
    c.category = cat;
    c.explanation = std::move(why);
    c.evidence = clip(std::move(evidence));
    return c;
  };
  const std::string msg = g.pred_error.value_or("");

  if (g.pred.status == "error" && message_names_missing_object(msg))
    return set(ErrorCategory::SchemaLinking, "The prediction references an object the target schema does not define.", msg);
  if (auto name = unknown_reference(g))
    return set(ErrorCategory::SchemaLinking,
               fmt::format("'{}' is not a table or column of the target schema.", *name), *name);
  if (g.pred.status == "timeout" || g.pred.error_kind == ErrorKind::Connection)
    return set(ErrorCategory::InvalidEvaluation, "Execution did not complete, so the query could not be judged.",
               msg.empty() ? g.pred.status : msg);
  if (g.pred.status == "error" && text::icontains(msg, "group by"))
    return set(ErrorCategory::Aggregation, "The target engine rejected the grouping of the query.", msg);
  if (g.pred.status == "error" && g.pred.error_kind == ErrorKind::Syntax)
    return set(ErrorCategory::Dialect, "The target engine rejected the query's syntax or functions.", msg);

  if (g.pred.status == "ok") {
    auto p = detail::scan_sql(g.pred_sql);
    auto q = detail::scan_sql(g.gold_sql);
    bool same_rows = clause(p, "where") == clause(q, "where");
    auto pg = clause(p, "group", "by"), qg = clause(q, "group", "by");
    auto po = clause(p, "order", "by"), qo = clause(q, "order", "by");
    if (same_rows && (aggregates(p) != aggregates(q) || pg != qg || po != qo)) {
      std::string ev = pg != qg ? "GROUP BY " + pg : po != qo ? "ORDER BY " + po : "aggregates differ";
      return set(ErrorCategory::Aggregation, "Rows are filtered like the reference but grouped or aggregated differently.",
                 text::trim(ev).empty() ? std::string("no GROUP BY") : std::string(text::trim(ev)));
    }
  }
  auto where = clause(detail::scan_sql(g.pred_sql), "where");
  return set(ErrorCategory::Filtering, "The query selects different rows than the reference.",
             where.empty() ? (msg.empty() ? std::string("results differ") : msg) : "WHERE " + std::string(text::trim(where)));
}

std::string RuleJudge::respond(const GapError& gap, const std::string&) {
  auto c = classify(gap);
  return nlohmann::json{{"question_id", c.question_id},
                        {"category", to_string(c.category)},
                        {"explanation", c.explanation},
                        {"evidence", c.evidence}}
      .dump();
}

}  // namespace poly::gap
