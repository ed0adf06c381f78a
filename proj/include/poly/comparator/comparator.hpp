#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "poly/core/result_set.hpp"

namespace poly::cmp {

enum class OrderByScope { Anywhere, OuterOnly };

struct ComparatorConfig {
  double rtol = 1e-5;
  double atol = 1e-8;
  bool trim_strings = true;
  // Where an ORDER BY in the gold query makes row order significant.
  OrderByScope order_by_scope = OrderByScope::Anywhere;
  // Upper bound on row-pair checks spent in the bag-matching fallback.
  std::uint64_t match_budget = std::uint64_t{1} << 24;
};

/// Case-insensitive search for the ORDER BY token pair outside string
/// literals, quoted identifiers and comments.
bool contains_order_by(std::string_view sql, OrderByScope scope = OrderByScope::Anywhere);

// Null -> "␀", numbers without trailing zeros, ISO-8601 UTC temporals,
// lowercase hex bytes.
std::string canonical_cell_text(const Cell& cell);

/// Total order over cells: non-null before null; Bool < numeric < Date <
/// Timestamp < Text < Bytes; numerics compared exactly as one class (NaN
/// last, numeric ties broken Int < Decimal < Float).
std::strong_ordering compare_cells(const Cell& a, const Cell& b);

// Stable row sort by compare_cells, column 0 first.
ResultSet lex_sort(const ResultSet& rs);

/// Semantic equality with `gold` as the tolerance reference.
bool cells_equal(const Cell& pred, const Cell& gold, const ComparatorConfig& cfg = {});

struct CompareResult {
  bool equal = false;
  std::string reason;  // empty when equal
  explicit operator bool() const { return equal; }
};

CompareResult compare(const ResultSet& gold, const ResultSet& pred, std::string_view gold_sql,
                      const ComparatorConfig& cfg = {});

}  // namespace poly::cmp
