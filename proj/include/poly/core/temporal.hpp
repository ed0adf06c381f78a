#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace poly {

/// Calendar date (no time zone).
struct Date {
  std::chrono::sys_days days{};

  static Date from_ymd(int y, unsigned m, unsigned d);
  auto operator<=>(const Date&) const = default;
};

/// UTC instant with microsecond precision.
struct Timestamp {
  std::chrono::sys_time<std::chrono::microseconds> instant{};

  static Timestamp from_micros(std::int64_t us) {
    return Timestamp{std::chrono::sys_time<std::chrono::microseconds>(std::chrono::microseconds(us))};
  }
  std::int64_t micros() const { return instant.time_since_epoch().count(); }
  auto operator<=>(const Timestamp&) const = default;
};

// Strict `YYYY-MM-DD`, calendar-valid.
std::optional<Date> parse_iso_date(std::string_view text);

/// `YYYY-MM-DD[ T]HH:MM:SS[.f{1,6}]`, optionally followed by `Z` or a
/// `±HH[:MM]` offset when `allow_offset` is set. Naive values are taken as
/// UTC; offsets are folded into the instant.
std::optional<Timestamp> parse_iso_timestamp(std::string_view text, bool allow_offset = true);

// "2021-01-05"
std::string format_date(Date d);
// "2021-01-05T10:00:00Z" / "2021-01-05T10:00:00.25Z" (fraction trimmed)
std::string format_timestamp_iso(Timestamp t);
// "2021-01-05 10:00:00.250000" / "2021-01-05 10:00:00" - engine literal form
std::string format_timestamp_sql(Timestamp t);

Timestamp midnight(Date d);

}  // namespace poly
