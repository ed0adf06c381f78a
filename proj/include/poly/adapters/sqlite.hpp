#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "poly/core/result_set.hpp"
#include "poly/core/schema.hpp"

namespace poly::adapters {

/// Database file for an embedded DSN path: the path itself, or
/// `<dir>/<ns>.sqlite` when the path names a directory.
std::filesystem::path sqlite_file_for(const std::string& dsn_path, const std::string& ns);

/// The quirk dialect's deterministic output distortion: upper-cased column
/// names, rows rotated by one unless `sql` has ORDER BY, temporals as ISO
/// text, floats scaled by (1 + 1e-7), text padded with one trailing space.
ResultSet quirk_perturb(const ResultSet& rs, std::string_view sql);

/// Type of a column from an SQLite declared type, when it names a type the
/// decoder treats specially (date, timestamp, boolean).
std::optional<TypeKind> hinted_kind_from_decltype(std::string_view declared);

}  // namespace poly::adapters
