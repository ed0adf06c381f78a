#pragma once

// Random result-set pairs and a brute-force multiset oracle, shared by the
// comparator tests and the acceptance runner.

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "poly/comparator/comparator.hpp"
#include "poly/core/text.hpp"

namespace poly::testing {

// Alignment re-derived independently: returns pred column per gold column,
// or empty with ok=false.
inline bool oracle_align(const ResultSet& gold, const ResultSet& pred, std::vector<std::size_t>& out) {
  out.clear();
  std::vector<bool> used(pred.column_count(), false);
  bool by_name = true;
  for (const auto& g : gold.columns()) {
    std::size_t found = pred.column_count();
    for (std::size_t c = 0; c < pred.column_count(); ++c) {
      if (!used[c] && text::to_lower(pred.columns()[c]) == text::to_lower(g)) {
        found = c;
        break;
      }
    }
    if (found == pred.column_count()) {
      by_name = false;
      break;
    }
    used[found] = true;
    out.push_back(found);
  }
  if (by_name) return true;
  if (gold.column_count() != pred.column_count()) return false;
  out.resize(gold.column_count());
  std::iota(out.begin(), out.end(), 0);
  return true;
}

/// Multiset (or sequence, when `ordered`) equality by exhaustive search
/// over row permutations.
inline bool oracle_equal(const ResultSet& gold, const ResultSet& pred, bool ordered, const cmp::ComparatorConfig& cfg) {
  if (gold.row_count() == 0 && pred.row_count() == 0) return true;
  if (gold.row_count() != pred.row_count()) return false;
  std::vector<std::size_t> cols;
  if (!oracle_align(gold, pred, cols)) return false;
  std::vector<std::size_t> perm(pred.row_count());
  std::iota(perm.begin(), perm.end(), 0);
  auto matches = [&] {
    for (std::size_t r = 0; r < perm.size(); ++r)
      for (std::size_t c = 0; c < cols.size(); ++c)
        if (!cmp::cells_equal(pred.at(perm[r], cols[c]), gold.at(r, c), cfg)) return false;
    return true;
  };
  if (ordered) return matches();
  do {
    if (matches()) return true;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

/// Generator biased towards near-equal values so that both outcomes occur
/// often and the tolerance, trim and temporal bridges are exercised.
class PairGenerator {
 public:
  explicit PairGenerator(std::uint64_t seed) : rng_(seed) {}

  Cell base_cell() {
    switch (pick(10)) {
      case 0: return Cell::null();
      case 1: return Cell::integer(pick(4));
      case 2: return Cell::floating(pick(4) + (pick(2) ? 0.0 : 0.5));
      case 3: return Cell::decimal(Decimal::parse(pick(2) ? "1.50" : "2.0"));
      case 4: return Cell::text(std::string(1, static_cast<char>('a' + pick(3))));
      case 5: return Cell::boolean(pick(2));
      case 6: return Cell::date(Date::from_ymd(2021, 1, 1 + static_cast<unsigned>(pick(3))));
      case 7: return Cell::timestamp(midnight(Date::from_ymd(2021, 1, 1 + static_cast<unsigned>(pick(3)))));
      case 8: return Cell::bytes(std::string(1, static_cast<char>(pick(3))));
      default: return Cell::text(pick(2) ? "2021-01-0" + std::to_string(1 + pick(3)) : "x");
    }
  }

  // A value that is usually, but not always, equal to `c`.
  Cell variant_of(const Cell& c) {
    switch (c.kind()) {
      case CellKind::Int:
        switch (pick(5)) {
          case 0: return Cell::floating(static_cast<double>(c.as_int()) * (1 + 4e-6));
          case 1: return Cell::decimal(Decimal(BigInt(c.as_int()) * 100, 2));
          case 2: return Cell::floating(static_cast<double>(c.as_int()) + 1e-9);
          case 3: return c.as_int() <= 1 ? Cell::boolean(c.as_int() == 1) : c;
          default: return c;
        }
      case CellKind::Float:
        switch (pick(4)) {
          case 0: return Cell::floating(c.as_float() * (1 + 9e-6));
          case 1: return Cell::floating(c.as_float() * (1 + 2e-5));
          case 2: return Cell::decimal(Decimal::parse(text::format_double(c.as_float())));
          default: return c;
        }
      case CellKind::Decimal:
        return pick(2) ? Cell::floating(static_cast<double>(c.as_decimal().to_long_double())) : c;
      case CellKind::Text:
        switch (pick(4)) {
          case 0: return Cell::text(c.as_text() + " ");
          case 1: return Cell::text(" " + c.as_text());
          case 2: return Cell::text(text::to_upper(c.as_text()));
          default: return c;
        }
      case CellKind::Date:
        switch (pick(4)) {
          case 0: return Cell::text(format_date(c.as_date()));
          case 1: return Cell::text(format_date(c.as_date()) + " 00:00:00");
          case 2: return Cell::timestamp(midnight(c.as_date()));
          default: return c;
        }
      case CellKind::Timestamp:
        switch (pick(3)) {
          case 0: return Cell::text(format_timestamp_iso(c.as_timestamp()));
          case 1: return Cell::text(format_timestamp_sql(c.as_timestamp()).substr(0, 10));
          default: return c;
        }
      case CellKind::Bool: return pick(2) ? Cell::integer(c.as_bool() ? 1 : 0) : c;
      default: return pick(6) == 0 ? base_cell() : c;
    }
  }

  struct Case {
    ResultSet gold;
    ResultSet pred;
    std::string gold_sql;
    bool ordered;
  };

  Case next() {
    const std::size_t cols = 1 + pick(4), rows = pick(7);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < cols; ++c) names.push_back(pick(5) == 0 ? "v" : "c" + std::to_string(c));
    std::vector<Row> g(rows, Row(cols));
    // Few distinct rows so duplicates and near-duplicates are common.
    for (auto& r : g) {
      if (!g.empty() && &r != &g[0] && pick(3) == 0) {
        r = g[pick(static_cast<int>(&r - &g[0]))];
        continue;
      }
      for (auto& cell : r) cell = base_cell();
    }
    const bool ordered = pick(4) == 0;
    std::vector<Row> p = g;
    if (!ordered || pick(2)) std::shuffle(p.begin(), p.end(), rng_);
    for (auto& r : p)
      for (auto& cell : r)
        if (pick(3) == 0) cell = variant_of(cell);
    if (pick(8) == 0 && !p.empty()) p.pop_back();
    if (pick(8) == 0) p.push_back(g.empty() ? Row(cols, Cell::integer(1)) : g[pick(static_cast<int>(g.size()))]);

    std::vector<std::string> pnames = names;
    for (auto& n : pnames)
      if (pick(2)) n = text::to_upper(n);
    switch (pick(6)) {
      case 0: {  // extra prediction column
        std::size_t at = pick(static_cast<int>(cols + 1));
        pnames.insert(pnames.begin() + static_cast<std::ptrdiff_t>(at), "extra");
        for (auto& r : p) r.insert(r.begin() + static_cast<std::ptrdiff_t>(at), base_cell());
        break;
      }
      case 1:  // renamed column: positional fallback
        pnames[pick(static_cast<int>(cols))] = "renamed";
        break;
      case 2: {  // reversed column order, names preserved
        std::reverse(pnames.begin(), pnames.end());
        for (auto& r : p) std::reverse(r.begin(), r.end());
        break;
      }
      default: break;
    }
    std::string sql = ordered ? "SELECT * FROM t ORDER BY 1" : "SELECT * FROM t";
    return Case{ResultSet(names, g), ResultSet(pnames, p), sql, ordered};
  }

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace poly::testing
