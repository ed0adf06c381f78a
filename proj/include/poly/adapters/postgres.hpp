#pragma once

#include <string>
#include <string_view>

#include "poly/core/records.hpp"

namespace poly::adapters {

/// One text-format value of a column with type `oid`. Types without a
/// dedicated Cell alternative decode as Text. Throws DecodeError.
Cell decode_postgres_value(unsigned oid, std::string_view value);

/// Error kind from a SQLSTATE code and the primary message.
ErrorKind classify_sqlstate(std::string_view sqlstate, std::string_view message);

// One value in COPY text format (`\N` for null, backslash escapes).
void append_copy_field(std::string& out, const Cell& cell);

}  // namespace poly::adapters
