#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace poly::text {

std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
std::string_view trim(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);
bool icontains(std::string_view haystack, std::string_view needle);

std::string hex_encode(std::string_view octets);
std::string hex_decode(std::string_view hex);  // throws ParseError

// Well-formed UTF-8 (no overlongs, surrogates or code points past U+10FFFF).
bool valid_utf8(std::string_view s);

// Shortest text that parses back to the same double; "nan", "inf", "-inf".
std::string format_double(double v);
double parse_double(std::string_view s);  // throws ParseError

std::vector<std::string> split(std::string_view s, char sep);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace poly::text
