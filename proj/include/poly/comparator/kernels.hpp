#pragma once

// Data-parallel kernels. Each has a serial reference with identical output.

#include <cstdint>
#include <string>
#include <vector>

#include "poly/comparator/comparator.hpp"

namespace poly::cmp {

struct ComparePair {
  const ResultSet* gold = nullptr;
  const ResultSet* pred = nullptr;
  std::string gold_sql;
};

std::vector<CompareResult> compare_batch(const std::vector<ComparePair>& pairs, const ComparatorConfig& cfg);
std::vector<CompareResult> compare_batch_serial(const std::vector<ComparePair>& pairs, const ComparatorConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes);

/// Adds, per column, the FNV-1a hash of each cell's canonical text into
/// `sums` (wrapping). The sum is order-insensitive, so batches can be folded
/// in any order.
void accumulate_column_checksums(const std::vector<Row>& rows, std::vector<std::uint64_t>& sums);
void accumulate_column_checksums_serial(const std::vector<Row>& rows, std::vector<std::uint64_t>& sums);

}  // namespace poly::cmp
