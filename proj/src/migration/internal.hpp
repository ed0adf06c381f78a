#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poly/core/schema.hpp"

namespace poly::migration::detail {

// What an SQLite declared type says, before looking at the data.
enum class Declared { Integer, Text, Float, Boolean, Decimal, Date, Timestamp, Untyped };

struct DeclaredType {
  Declared cls = Declared::Untyped;
  int precision = 0;  // decimals only; 0 = not given
  int scale = 0;
};

DeclaredType classify_declared(std::string_view declared);

// "table.column -> kind" for promoted temporal columns, and for columns
// whose declared type the data overrode.
void describe_changes(const SchemaSnapshot& inferred, std::vector<std::string>& promoted,
                      std::vector<std::string>& widened);

}  // namespace poly::migration::detail
