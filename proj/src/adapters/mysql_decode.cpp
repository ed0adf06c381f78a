#include <fmt/format.h>

#include <charconv>

#include "poly/adapters/mysql.hpp"
#include "poly/adapters/session.hpp"
#include "poly/core/text.hpp"

namespace poly::adapters {

namespace {

Cell integer_cell(std::string_view v) {
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), i);
  if (ec == std::errc{} && p == v.data() + v.size()) return Cell::integer(i);
  Decimal d = Decimal::parse(v);  // BIGINT UNSIGNED above int64
  if (d.scale() != 0) throw DecodeError(fmt::format("'{}' is not an integer", v));
  return Cell::decimal(std::move(d));
}

}  // namespace

Cell decode_mysql_value(const MysqlField& f, std::optional<std::string_view> value) {
  if (!value) return Cell::null();
  std::string_view v = *value;
  namespace t = mysql_type;
  try {
    switch (f.type) {
      case t::Tiny:
        if (f.length == 1 && (v == "0" || v == "1")) return Cell::boolean(v == "1");
        return integer_cell(v);
      case t::Short:
      case t::Long:
      case t::Int24:
      case t::LongLong:
      case t::Year: return integer_cell(v);
      case t::Float:
      case t::Double: return Cell::floating(text::parse_double(v));
      case t::Decimal:
      case t::NewDecimal: return Cell::decimal(Decimal::parse(v));
      case t::Null: return Cell::null();
      case t::Date:
      case t::NewDate:
        if (auto d = parse_iso_date(v)) return Cell::date(*d);
        throw DecodeError(fmt::format("'{}' is not a valid date", v));
      case t::Timestamp:
      case t::DateTime:
        if (auto ts = parse_iso_timestamp(v, false)) return Cell::timestamp(*ts);
        throw DecodeError(fmt::format("'{}' is not a valid timestamp", v));
      case t::Bit: {
        if (f.length == 1 && v.size() == 1) return Cell::boolean(v[0] != 0);
        std::uint64_t acc = 0;
        for (unsigned char c : v) acc = (acc << 8) | c;
        if (acc > static_cast<std::uint64_t>(INT64_MAX)) return Cell::decimal(Decimal(BigInt(acc), 0));
        return Cell::integer(static_cast<std::int64_t>(acc));
      }
      case t::Geometry: return Cell::bytes(std::string(v));
      case t::TinyBlob:
      case t::MediumBlob:
      case t::LongBlob:
      case t::Blob:
      case t::VarString:
      case t::String:
      case t::VarChar:
        if ((f.flags & kMysqlBinaryFlag) && f.charsetnr == kMysqlBinaryCharset) return Cell::bytes(std::string(v));
        return Cell::text(std::string(v));
      default: return Cell::text(std::string(v));  // TIME, JSON, ENUM, SET and unknown types
    }
  } catch (const ParseError& e) {
    throw DecodeError(e.what());
  }
}

ErrorKind classify_mysql_error(unsigned code, std::string_view message) {
  switch (code) {
    case 1064:  // ER_PARSE_ERROR
    case 1149:  // ER_SYNTAX_ERROR
    case 1305:  // ER_SP_DOES_NOT_EXIST (unknown function)
    case 1630:  // ER_FUNC_INEXISTENT_NAME_COLLISION
      return ErrorKind::Syntax;
    case 1046:  // ER_NO_DB_ERROR
    case 1049:  // ER_BAD_DB_ERROR
    case 1052:  // ER_NON_UNIQ_ERROR
    case 1054:  // ER_BAD_FIELD_ERROR
    case 1055:  // ER_WRONG_FIELD_WITH_GROUP
    case 1056:  // ER_WRONG_GROUP_FIELD
    case 1111:  // ER_INVALID_GROUP_FUNC_USE
    case 1140:  // ER_MIX_OF_GROUP_FUNC_AND_FIELDS
    case 1146:  // ER_NO_SUCH_TABLE
    case 1222:  // ER_WRONG_NUMBER_OF_COLUMNS_IN_SELECT
    case 1241:  // ER_OPERAND_COLUMNS
    case 1247:  // ER_ILLEGAL_REFERENCE
    case 1582:  // ER_WRONG_PARAMCOUNT_TO_NATIVE_FCT
    case 1583:  // ER_WRONG_PARAMETERS_TO_NATIVE_FCT
      return ErrorKind::Semantic;
    case 1048:  // ER_BAD_NULL_ERROR
    case 1062:  // ER_DUP_ENTRY
    case 1216:
    case 1217:
    case 1451:
    case 1452:  // foreign key failures
    case 1264:  // ER_WARN_DATA_OUT_OF_RANGE
    case 1406:  // ER_DATA_TOO_LONG
    case 3819:  // ER_CHECK_CONSTRAINT_VIOLATED
      return ErrorKind::Constraint;
    case 1040:  // ER_CON_COUNT_ERROR
    case 1045:  // ER_ACCESS_DENIED_ERROR
    case 2002:  // CR_CONNECTION_ERROR
    case 2003:  // CR_CONN_HOST_ERROR
    case 2005:  // CR_UNKNOWN_HOST
    case 2006:  // CR_SERVER_GONE_ERROR
    case 2013:  // CR_SERVER_LOST
      return ErrorKind::Connection;
    default: return classify_message(message);
  }
}

bool is_mysql_timeout(unsigned code) {
  return code == 3024    // ER_QUERY_TIMEOUT (MAX_EXECUTION_TIME)
         || code == 1317  // ER_QUERY_INTERRUPTED (KILL QUERY)
         || code == 1028;  // ER_FILSORT_ABORT
}

}  // namespace poly::adapters
