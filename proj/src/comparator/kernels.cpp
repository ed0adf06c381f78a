#include "poly/comparator/kernels.hpp"

#include <omp.h>

namespace poly::cmp {

std::vector<CompareResult> compare_batch_serial(const std::vector<ComparePair>& pairs, const ComparatorConfig& cfg) {
  std::vector<CompareResult> out(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) out[i] = compare(*pairs[i].gold, *pairs[i].pred, pairs[i].gold_sql, cfg);
  return out;
}

std::vector<CompareResult> compare_batch(const std::vector<ComparePair>& pairs, const ComparatorConfig& cfg) {
  std::vector<CompareResult> out(pairs.size());
  const auto n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) out[i] = compare(*pairs[i].gold, *pairs[i].pred, pairs[i].gold_sql, cfg);
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void accumulate_column_checksums_serial(const std::vector<Row>& rows, std::vector<std::uint64_t>& sums) {
  for (const auto& row : rows) {
    if (sums.size() < row.size()) sums.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) sums[c] += fnv1a64(canonical_cell_text(row[c]));
  }
}

void accumulate_column_checksums(const std::vector<Row>& rows, std::vector<std::uint64_t>& sums) {
  if (rows.empty()) return;
  const std::size_t ncols = rows.front().size();
  if (sums.size() < ncols) sums.resize(ncols, 0);
  const auto n = static_cast<std::int64_t>(rows.size());
  for (std::size_t c = 0; c < ncols; ++c) {
    std::uint64_t acc = 0;
    // Unsigned addition wraps, so the reduction is exact in any order.
#pragma omp parallel for reduction(+ : acc) schedule(static)
    for (std::int64_t r = 0; r < n; ++r) acc += fnv1a64(canonical_cell_text(rows[r][c]));
    sums[c] += acc;
  }
}

}  // namespace poly::cmp
