#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "poly/core/cell.hpp"

namespace poly {

using Row = std::vector<Cell>;

/// Materialized query output. Column names may repeat; position is the
/// identity of a column.
class ResultSet {
 public:
  ResultSet() = default;
  /// Throws SchemaError when a row's width differs from the column count.
  ResultSet(std::vector<std::string> columns, std::vector<Row> rows);

  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::size_t column_count() const { return columns_.size(); }
  std::size_t row_count() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }

  const Cell& at(std::size_t row, std::size_t col) const { return rows_[row][col]; }

  void append(Row row);  // width-checked

  bool operator==(const ResultSet&) const = default;

 private:
  std::vector<std::string> columns_;
  std::vector<Row> rows_;
};

}  // namespace poly
