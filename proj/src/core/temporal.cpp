#include "poly/core/temporal.hpp"

#include <fmt/format.h>

#include "poly/core/errors.hpp"

namespace poly {

using namespace std::chrono;

Date Date::from_ymd(int y, unsigned m, unsigned d) {
  year_month_day ymd{year{y}, month{m}, day{d}};
  if (!ymd.ok()) throw ParseError(fmt::format("invalid calendar date {}-{}-{}", y, m, d));
  return Date{sys_days{ymd}};
}

namespace {

// Reads exactly n digits at pos.
bool digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

std::optional<sys_days> date_prefix(std::string_view s) {
  int y, m, d;
  if (!digits(s, 0, 4, y) || s.size() < 10 || s[4] != '-' || !digits(s, 5, 2, m) || s[7] != '-' ||
      !digits(s, 8, 2, d))
    return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

}  // namespace

std::optional<Date> parse_iso_date(std::string_view text) {
  if (text.size() != 10) return std::nullopt;
  auto d = date_prefix(text);
  if (!d) return std::nullopt;
  return Date{*d};
}

std::optional<Timestamp> parse_iso_timestamp(std::string_view s, bool allow_offset) {
  auto d = date_prefix(s);
  if (!d || s.size() < 19 || (s[10] != ' ' && s[10] != 'T')) return std::nullopt;
  int hh, mm, ss;
  if (!digits(s, 11, 2, hh) || s[13] != ':' || !digits(s, 14, 2, mm) || s[16] != ':' || !digits(s, 17, 2, ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  std::size_t pos = 19;
  std::int64_t frac_us = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t n = 0;
    std::int64_t v = 0;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (++n > 6) return std::nullopt;
      v = v * 10 + (s[pos++] - '0');
    }
    if (n == 0) return std::nullopt;
    for (std::size_t k = n; k < 6; ++k) v *= 10;
    frac_us = v;
  }
  std::int64_t offset_s = 0;
  if (pos < s.size()) {
    if (!allow_offset) return std::nullopt;
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '-' ? -1 : 1;
      int oh = 0, om = 0;
      if (!digits(s, pos + 1, 2, oh)) return std::nullopt;
      pos += 3;
      if (pos < s.size()) {
        if (s[pos] == ':') ++pos;
        if (!digits(s, pos, 2, om)) return std::nullopt;
        pos += 2;
      }
      if (oh > 23 || om > 59) return std::nullopt;
      offset_s = sign * (oh * 3600 + om * 60);
    } else {
      return std::nullopt;
    }
    if (pos != s.size()) return std::nullopt;
  }
  auto t = time_point_cast<microseconds>(*d) + hours(hh) + minutes(mm) + seconds(ss) + microseconds(frac_us) -
           seconds(offset_s);
  return Timestamp{t};
}

std::string format_date(Date d) {
  year_month_day ymd{d.days};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()));
}

namespace {

struct Parts {
  std::string date;
  int h, m, s;
  std::int64_t us;
};

Parts split(Timestamp t) {
  auto day = floor<days>(t.instant);
  auto tod = t.instant - day;
  hh_mm_ss<microseconds> hms{tod};
  return Parts{format_date(Date{day}), static_cast<int>(hms.hours().count()),
               static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()),
               hms.subseconds().count()};
}

}  // namespace

std::string format_timestamp_iso(Timestamp t) {
  Parts p = split(t);
  std::string out = fmt::format("{}T{:02d}:{:02d}:{:02d}", p.date, p.h, p.m, p.s);
  if (p.us != 0) {
    std::string frac = fmt::format("{:06d}", p.us);
    while (frac.back() == '0') frac.pop_back();
    out += "." + frac;
  }
  return out + "Z";
}

std::string format_timestamp_sql(Timestamp t) {
  Parts p = split(t);
  std::string out = fmt::format("{} {:02d}:{:02d}:{:02d}", p.date, p.h, p.m, p.s);
  if (p.us != 0) out += fmt::format(".{:06d}", p.us);
  return out;
}

Timestamp midnight(Date d) { return Timestamp{time_point_cast<microseconds>(d.days)}; }

}  // namespace poly
