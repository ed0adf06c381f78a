#include "poly/comparator/comparator.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "poly/core/text.hpp"

namespace poly::cmp {

// ---------------------------------------------------------------- ORDER BY

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

}  // namespace

bool contains_order_by(std::string_view sql, OrderByScope scope) {
  // Replace masked regions by spaces, track paren depth per position.
  std::string masked(sql.size(), ' ');
  std::vector<int> depth(sql.size(), 0);
  int d = 0;
  std::size_t i = 0;
  auto skip_quoted = [&](char close) {
    ++i;
    while (i < sql.size()) {
      if (sql[i] == close) {
        if (close != ']' && i + 1 < sql.size() && sql[i + 1] == close) {
          i += 2;  // doubled quote escape
          continue;
        }
        ++i;
        return;
      }
      if (sql[i] == '\\' && close == '`') ++i;
      ++i;
    }
  };
  while (i < sql.size()) {
    char c = sql[i];
    if (c == '\'' || c == '"' || c == '`') {
      skip_quoted(c);
    } else if (c == '[') {
      skip_quoted(']');
    } else if (c == '-' && i + 1 < sql.size() && sql[i + 1] == '-') {
      while (i < sql.size() && sql[i] != '\n') ++i;
    } else if (c == '#' ) {
      while (i < sql.size() && sql[i] != '\n') ++i;
    } else if (c == '/' && i + 1 < sql.size() && sql[i + 1] == '*') {
      auto end = sql.find("*/", i + 2);
      i = end == std::string_view::npos ? sql.size() : end + 2;
    } else {
      if (c == '(') ++d;
      masked[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      depth[i] = d;
      if (c == ')') d = std::max(0, d - 1);
      ++i;
    }
  }
  std::size_t pos = 0;
  while ((pos = masked.find("order", pos)) != std::string::npos) {
    std::size_t after = pos + 5;
    bool word_start = pos == 0 || !ident_char(masked[pos - 1]);
    std::size_t j = after;
    while (j < masked.size() && std::isspace(static_cast<unsigned char>(masked[j]))) ++j;
    bool by = j > after && masked.compare(j, 2, "by") == 0 && (j + 2 == masked.size() || !ident_char(masked[j + 2]));
    if (word_start && by && (scope == OrderByScope::Anywhere || depth[pos] == 0)) return true;
    pos = after;
  }
  return false;
}

// ---------------------------------------------------------------- canonical text

std::string canonical_cell_text(const Cell& c) {
  switch (c.kind()) {
    case CellKind::Null: return "␀";
    case CellKind::Int: return std::to_string(c.as_int());
    case CellKind::Float: return text::format_double(c.as_float());
    case CellKind::Decimal: return c.as_decimal().normalized();
    case CellKind::Text: return c.as_text();
    case CellKind::Bool: return c.as_bool() ? "1" : "0";
    case CellKind::Date: return format_date(c.as_date());
    case CellKind::Timestamp: return format_timestamp_iso(c.as_timestamp());
    case CellKind::Bytes: return text::hex_encode(c.as_bytes().octets);
  }
  return {};
}

// ---------------------------------------------------------------- numeric order

namespace {

struct Rational {
  BigInt num;
  BigInt den;  // > 0
};

Rational exact_of_double(double v) {
  int exp = 0;
  double m = std::frexp(v, &exp);
  auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
  exp -= 53;
  Rational r{BigInt(mant), BigInt(1)};
  if (exp >= 0)
    r.num <<= exp;
  else
    r.den <<= -exp;
  return r;
}

Rational exact_of(const Cell& c) {
  switch (c.kind()) {
    case CellKind::Int: return {BigInt(c.as_int()), BigInt(1)};
    case CellKind::Bool: return {BigInt(c.as_bool() ? 1 : 0), BigInt(1)};
    case CellKind::Float: return exact_of_double(c.as_float());
    case CellKind::Decimal: {
      BigInt den = 1;
      for (int i = 0; i < c.as_decimal().scale(); ++i) den *= 10;
      return {c.as_decimal().unscaled(), den};
    }
    default: return {BigInt(0), BigInt(1)};
  }
}

std::strong_ordering order_of(const BigInt& a, const BigInt& b) {
  if (a < b) return std::strong_ordering::less;
  if (b < a) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

// Numeric value order; NaN sorts after +inf and equals NaN.
std::strong_ordering numeric_value_order(const Cell& a, const Cell& b) {
  const bool af = a.kind() == CellKind::Float, bf = b.kind() == CellKind::Float;
  const bool an = af && std::isnan(a.as_float()), bn = bf && std::isnan(b.as_float());
  if (an || bn) {
    if (an && bn) return std::strong_ordering::equal;
    return an ? std::strong_ordering::greater : std::strong_ordering::less;
  }
  const bool ai = af && std::isinf(a.as_float()), bi = bf && std::isinf(b.as_float());
  if (ai || bi) {
    double x = ai ? a.as_float() : 0.0, y = bi ? b.as_float() : 0.0;
    if (ai && bi) return x < y ? std::strong_ordering::less : x > y ? std::strong_ordering::greater : std::strong_ordering::equal;
    if (ai) return x < 0 ? std::strong_ordering::less : std::strong_ordering::greater;
    return y < 0 ? std::strong_ordering::greater : std::strong_ordering::less;
  }
  if (a.kind() == CellKind::Int && b.kind() == CellKind::Int) return a.as_int() <=> b.as_int();
  if (af && bf) {
    double x = a.as_float(), y = b.as_float();
    return x < y ? std::strong_ordering::less : x > y ? std::strong_ordering::greater : std::strong_ordering::equal;
  }
  if (a.kind() == CellKind::Decimal && b.kind() == CellKind::Decimal) return a.as_decimal().compare_value(b.as_decimal());
  Rational x = exact_of(a), y = exact_of(b);
  return order_of(x.num * y.den, y.num * x.den);
}

int type_rank(CellKind k) {
  switch (k) {
    case CellKind::Bool: return 0;
    case CellKind::Int:
    case CellKind::Float:
    case CellKind::Decimal: return 1;
    case CellKind::Date: return 2;
    case CellKind::Timestamp: return 3;
    case CellKind::Text: return 4;
    case CellKind::Bytes: return 5;
    case CellKind::Null: return 6;
  }
  return 6;
}

int numeric_tie_rank(CellKind k) { return k == CellKind::Int ? 0 : k == CellKind::Decimal ? 1 : 2; }

}  // namespace

std::strong_ordering compare_cells(const Cell& a, const Cell& b) {
  int ra = type_rank(a.kind()), rb = type_rank(b.kind());
  if (ra != rb) return ra <=> rb;
  switch (a.kind()) {
    case CellKind::Null: return std::strong_ordering::equal;
    case CellKind::Bool: return static_cast<int>(a.as_bool()) <=> static_cast<int>(b.as_bool());
    case CellKind::Int:
    case CellKind::Float:
    case CellKind::Decimal: {
      auto v = numeric_value_order(a, b);
      if (v != 0) return v;
      int ta = numeric_tie_rank(a.kind()), tb = numeric_tie_rank(b.kind());
      if (ta != tb) return ta <=> tb;
      if (a.kind() == CellKind::Decimal) return a.as_decimal().scale() <=> b.as_decimal().scale();
      if (a.kind() == CellKind::Float) {
        // -0.0 before +0.0
        return static_cast<int>(!std::signbit(a.as_float())) <=> static_cast<int>(!std::signbit(b.as_float()));
      }
      return std::strong_ordering::equal;
    }
    case CellKind::Date: return a.as_date().days <=> b.as_date().days;
    case CellKind::Timestamp: return a.as_timestamp().micros() <=> b.as_timestamp().micros();
    case CellKind::Text: return a.as_text().compare(b.as_text()) <=> 0;
    case CellKind::Bytes: return a.as_bytes().octets.compare(b.as_bytes().octets) <=> 0;
  }
  return std::strong_ordering::equal;
}

ResultSet lex_sort(const ResultSet& rs) {
  std::vector<Row> rows = rs.rows();
  std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
    for (std::size_t c = 0; c < x.size(); ++c) {
      auto o = compare_cells(x[c], y[c]);
      if (o != 0) return o < 0;
    }
    return false;
  });
  return ResultSet(rs.columns(), std::move(rows));
}

// ---------------------------------------------------------------- equality

namespace {

long double as_long_double(const Cell& c) {
  switch (c.kind()) {
    case CellKind::Int: return static_cast<long double>(c.as_int());
    case CellKind::Float: return c.as_float();
    case CellKind::Decimal: return c.as_decimal().to_long_double();
    case CellKind::Bool: return c.as_bool() ? 1.0L : 0.0L;
    default: return 0.0L;
  }
}

bool numeric_close(const Cell& pred, const Cell& gold, const ComparatorConfig& cfg) {
  if (numeric_value_order(pred, gold) == 0) return true;  // exact, including NaN/NaN and inf/inf
  auto nonfinite = [](const Cell& c) { return c.kind() == CellKind::Float && !std::isfinite(c.as_float()); };
  if (nonfinite(pred) || nonfinite(gold)) return false;
  long double p = as_long_double(pred), g = as_long_double(gold);
  return std::fabs(p - g) <= static_cast<long double>(cfg.atol) + static_cast<long double>(cfg.rtol) * std::fabs(g);
}

bool date_matches_text(Date d, std::string_view t) {
  t = text::trim(t);
  if (auto pd = parse_iso_date(t)) return *pd == d;
  if (auto pt = parse_iso_timestamp(t)) return *pt == midnight(d);
  return false;
}

bool timestamp_matches_text(Timestamp ts, std::string_view t) {
  t = text::trim(t);
  if (auto pt = parse_iso_timestamp(t)) return *pt == ts;
  if (auto pd = parse_iso_date(t)) return midnight(*pd) == ts;
  return false;
}

bool numeric_like(const Cell& c) { return c.is_numeric() || c.kind() == CellKind::Bool; }

}  // namespace

bool cells_equal(const Cell& pred, const Cell& gold, const ComparatorConfig& cfg) {
  const CellKind pk = pred.kind(), gk = gold.kind();
  if (pk == CellKind::Null || gk == CellKind::Null) return pk == gk;
  if (pred.is_numeric() && gold.is_numeric()) return numeric_close(pred, gold, cfg);
  if (pk == CellKind::Bool && gk == CellKind::Bool) return pred.as_bool() == gold.as_bool();
  if (numeric_like(pred) && numeric_like(gold)) return numeric_close(pred, gold, cfg);
  if (pk == CellKind::Text && gk == CellKind::Text) {
    if (cfg.trim_strings) return text::trim(pred.as_text()) == text::trim(gold.as_text());
    return pred.as_text() == gold.as_text();
  }
  if (pk == CellKind::Text && gk == CellKind::Date) return date_matches_text(gold.as_date(), pred.as_text());
  if (gk == CellKind::Text && pk == CellKind::Date) return date_matches_text(pred.as_date(), gold.as_text());
  if (pk == CellKind::Text && gk == CellKind::Timestamp) return timestamp_matches_text(gold.as_timestamp(), pred.as_text());
  if (gk == CellKind::Text && pk == CellKind::Timestamp) return timestamp_matches_text(pred.as_timestamp(), gold.as_text());
  if (pk != gk) return false;
  return pred == gold;
}

// ---------------------------------------------------------------- compare

namespace {

std::string show(const Cell& c) {
  std::string s = c.kind() == CellKind::Text ? "'" + c.as_text() + "'" : canonical_cell_text(c);
  if (s.size() > 64) s = s.substr(0, 61) + "...";
  return s;
}

// Sort key that keeps semantically equal cells adjacent in the common cases:
// bools join numerics, text is trimmed, temporal values and temporal-looking
// text share the ISO rendering.
struct SortKey {
  std::uint8_t rank = 3;  // 0 numeric, 1 textual, 2 bytes, 3 null
  bool nan = false;
  long double num = 0;
  std::string str;
};

SortKey sort_key(const Cell& c, bool trim) {
  SortKey k;
  switch (c.kind()) {
    case CellKind::Null: k.rank = 3; break;
    case CellKind::Int:
    case CellKind::Float:
    case CellKind::Decimal:
    case CellKind::Bool:
      k.rank = 0;
      k.num = as_long_double(c);
      k.nan = std::isnan(k.num);
      break;
    case CellKind::Date:
      k.rank = 1;
      k.str = format_timestamp_iso(midnight(c.as_date()));
      break;
    case CellKind::Timestamp:
      k.rank = 1;
      k.str = format_timestamp_iso(c.as_timestamp());
      break;
    case CellKind::Text: {
      k.rank = 1;
      std::string_view t = trim ? text::trim(c.as_text()) : std::string_view(c.as_text());
      std::string_view tt = text::trim(t);
      if (tt.size() >= 10 && std::isdigit(static_cast<unsigned char>(tt[0]))) {
        if (auto ts = parse_iso_timestamp(tt)) {
          k.str = format_timestamp_iso(*ts);
          break;
        }
        if (auto d = parse_iso_date(tt)) {
          k.str = format_timestamp_iso(midnight(*d));
          break;
        }
      }
      k.str = std::string(t);
      break;
    }
    case CellKind::Bytes:
      k.rank = 2;
      k.str = c.as_bytes().octets;
      break;
  }
  return k;
}

int key_order(const SortKey& a, const SortKey& b) {
  if (a.rank != b.rank) return a.rank < b.rank ? -1 : 1;
  if (a.rank == 0) {
    if (a.nan != b.nan) return a.nan ? 1 : -1;
    if (a.nan) return 0;
    return a.num < b.num ? -1 : a.num > b.num ? 1 : 0;
  }
  int c = a.str.compare(b.str);
  return c < 0 ? -1 : c > 0 ? 1 : 0;
}

// Column view: cell (r, c) of the aligned grid is rs.at(r, map[c]).
struct View {
  const ResultSet* rs;
  const std::vector<std::size_t>* map;
  const Cell& at(std::size_t r, std::size_t c) const { return rs->at(r, (*map)[c]); }
};

std::vector<std::size_t> sorted_order(const View& v, std::size_t ncols, bool trim) {
  const std::size_t n = v.rs->row_count();
  std::vector<std::vector<SortKey>> keys(n, std::vector<SortKey>(ncols));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < ncols; ++c) keys[r][c] = sort_key(v.at(r, c), trim);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    for (std::size_t c = 0; c < ncols; ++c) {
      int o = key_order(keys[x][c], keys[y][c]);
      if (o != 0) return o < 0;
    }
    return false;
  });
  return idx;
}

struct Mismatch {
  std::size_t row, col;
};

std::optional<Mismatch> positional_mismatch(const View& gold, const std::vector<std::size_t>& gidx, const View& pred,
                                            const std::vector<std::size_t>& pidx, std::size_t ncols,
                                            const ComparatorConfig& cfg) {
  for (std::size_t r = 0; r < gidx.size(); ++r)
    for (std::size_t c = 0; c < ncols; ++c)
      if (!cells_equal(pred.at(pidx[r], c), gold.at(gidx[r], c), cfg)) return Mismatch{r, c};
  return std::nullopt;
}

struct BudgetExceeded {};

// Perfect matching between gold and pred rows where an edge means every
// aligned cell is equal. Kuhn's augmenting paths, iterative, edges
// evaluated lazily and counted against the budget.
bool perfect_matching(const View& gold, const std::vector<std::size_t>& gidx, const View& pred,
                      const std::vector<std::size_t>& pidx, std::size_t ncols, const ComparatorConfig& cfg) {
  const std::size_t n = gidx.size();
  std::uint64_t spent = 0;
  auto edge = [&](std::size_t g, std::size_t p) {
    if (++spent > cfg.match_budget) throw BudgetExceeded{};
    for (std::size_t c = 0; c < ncols; ++c)
      if (!cells_equal(pred.at(pidx[p], c), gold.at(gidx[g], c), cfg)) return false;
    return true;
  };
  constexpr std::size_t none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> match_gold(n, none), match_pred(n, none);
  for (std::size_t i = 0; i < n; ++i) {
    if (edge(i, i)) {
      match_gold[i] = i;
      match_pred[i] = i;
    }
  }
  struct Frame {
    std::size_t g, next, chosen;
  };
  std::vector<char> visited(n);
  std::vector<Frame> stack;
  for (std::size_t root = 0; root < n; ++root) {
    if (match_gold[root] != none) continue;
    std::fill(visited.begin(), visited.end(), 0);
    stack.assign(1, Frame{root, 0, none});
    bool found = false;
    while (!stack.empty() && !found) {
      Frame& f = stack.back();
      std::size_t p = f.next;
      while (p < n && (visited[p] || !edge(f.g, p))) ++p;
      if (p == n) {
        stack.pop_back();
        continue;
      }
      visited[p] = 1;
      f.next = p + 1;
      f.chosen = p;
      if (match_pred[p] == none) {
        for (const Frame& fr : stack) {
          match_pred[fr.chosen] = fr.g;
          match_gold[fr.g] = fr.chosen;
        }
        found = true;
      } else {
        stack.push_back(Frame{match_pred[p], 0, none});
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

CompareResult compare(const ResultSet& gold, const ResultSet& pred, std::string_view gold_sql,
                      const ComparatorConfig& cfg) {
  if (gold.row_count() == 0 && pred.row_count() == 0) return {true, {}};
  if (gold.row_count() != pred.row_count())
    return {false, fmt::format("Row count mismatch: gold {} rows, pred {} rows", gold.row_count(), pred.row_count())};

  // Column alignment: k-th occurrence of a gold name maps to the k-th
  // occurrence of the same lowercased name in the prediction.
  const std::size_t ncols = gold.column_count();
  std::vector<std::size_t> gold_map(ncols), pred_map(ncols);
  std::iota(gold_map.begin(), gold_map.end(), 0);
  {
    std::map<std::string, std::vector<std::size_t>> pred_positions;
    for (std::size_t c = 0; c < pred.column_count(); ++c) pred_positions[text::to_lower(pred.columns()[c])].push_back(c);
    std::map<std::string, std::size_t> seen;
    std::vector<std::string> missing;
    for (std::size_t c = 0; c < ncols; ++c) {
      std::string name = text::to_lower(gold.columns()[c]);
      std::size_t k = seen[name]++;
      auto it = pred_positions.find(name);
      if (it == pred_positions.end() || k >= it->second.size())
        missing.push_back(name);
      else
        pred_map[c] = it->second[k];
    }
    if (!missing.empty()) {
      if (pred.column_count() != ncols) {
        std::string names;
        for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m;
        return {false, fmt::format("Missing required columns: {}", names)};
      }
      std::iota(pred_map.begin(), pred_map.end(), 0);
    }
  }

  View gv{&gold, &gold_map}, pv{&pred, &pred_map};
  auto mismatch_reason = [&](const Mismatch& m, std::size_t grow, std::size_t prow) {
    return fmt::format("Value mismatch at row {}, column {} ({}): gold {}, pred {}", grow, m.col,
                       text::to_lower(gold.columns()[m.col]), show(gold.at(grow, m.col)),
                       show(pred.at(prow, pred_map[m.col])));
  };

  if (contains_order_by(gold_sql, cfg.order_by_scope)) {
    std::vector<std::size_t> ident(gold.row_count());
    std::iota(ident.begin(), ident.end(), 0);
    if (auto m = positional_mismatch(gv, ident, pv, ident, ncols, cfg)) return {false, mismatch_reason(*m, m->row, m->row)};
    return {true, {}};
  }

  auto gidx = sorted_order(gv, ncols, cfg.trim_strings);
  auto pidx = sorted_order(pv, ncols, cfg.trim_strings);
  auto m = positional_mismatch(gv, gidx, pv, pidx, ncols, cfg);
  if (!m) return {true, {}};
  try {
    if (perfect_matching(gv, gidx, pv, pidx, ncols, cfg)) return {true, {}};
  } catch (const BudgetExceeded&) {
    return {false, mismatch_reason(*m, gidx[m->row], pidx[m->row]) + " (row matching budget exhausted)"};
  }
  return {false, mismatch_reason(*m, gidx[m->row], pidx[m->row])};
}

}  // namespace poly::cmp
