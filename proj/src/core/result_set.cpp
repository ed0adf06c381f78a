#include "poly/core/result_set.hpp"

#include <fmt/format.h>

#include "poly/core/errors.hpp"

namespace poly {

ResultSet::ResultSet(std::vector<std::string> columns, std::vector<Row> rows)
    : columns_(std::move(columns)), rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].size() != columns_.size())
      throw SchemaError(fmt::format("row {} has {} cells, expected {}", i, rows_[i].size(), columns_.size()));
  }
}

void ResultSet::append(Row row) {
  if (row.size() != columns_.size())
    throw SchemaError(fmt::format("row {} has {} cells, expected {}", rows_.size(), row.size(), columns_.size()));
  rows_.push_back(std::move(row));
}

}  // namespace poly
