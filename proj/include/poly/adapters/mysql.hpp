#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "poly/core/records.hpp"

namespace poly::adapters {

/// Column metadata as reported by the MySQL client protocol.
struct MysqlField {
  std::string name;
  int type = 0;                  // protocol type code (enum_field_types)
  unsigned long length = 0;      // declared display width
  unsigned flags = 0;
  unsigned charsetnr = 0;
  unsigned decimals = 0;
};

namespace mysql_type {
inline constexpr int Decimal = 0, Tiny = 1, Short = 2, Long = 3, Float = 4, Double = 5, Null = 6, Timestamp = 7,
                     LongLong = 8, Int24 = 9, Date = 10, Time = 11, DateTime = 12, Year = 13, NewDate = 14,
                     VarChar = 15, Bit = 16, Json = 245, NewDecimal = 246, Enum = 247, Set = 248, TinyBlob = 249,
                     MediumBlob = 250, LongBlob = 251, Blob = 252, VarString = 253, String = 254, Geometry = 255;
}
inline constexpr unsigned kMysqlUnsignedFlag = 32;
inline constexpr unsigned kMysqlBinaryFlag = 128;
inline constexpr unsigned kMysqlBinaryCharset = 63;

/// Decodes one text-protocol value; `value` empty optional is SQL NULL.
/// TINYINT(1) (the engine's BOOLEAN) yields Bool for 0/1. Throws DecodeError.
Cell decode_mysql_value(const MysqlField& field, std::optional<std::string_view> value);

/// Error kind from a server or client error number.
ErrorKind classify_mysql_error(unsigned code, std::string_view message);
// True for the codes that signal an interrupted or over-time statement.
bool is_mysql_timeout(unsigned code);

}  // namespace poly::adapters
