#include "poly/core/decimal.hpp"

#include <cstdlib>
#include <string>

#include "poly/core/errors.hpp"

namespace poly {

namespace {

BigInt pow10(std::int32_t n) {
  BigInt r = 1;
  for (std::int32_t i = 0; i < n; ++i) r *= 10;
  return r;
}

}  // namespace

Decimal::Decimal(BigInt unscaled, std::int32_t scale) : unscaled_(std::move(unscaled)), scale_(scale) {
  if (scale_ < 0) {
    unscaled_ *= pow10(-scale_);
    scale_ = 0;
  }
}

Decimal Decimal::parse(std::string_view text) {
  auto fail = [&] { throw ParseError("not a decimal: '" + std::string(text) + "'"); };
  std::size_t i = 0;
  bool negative = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) negative = text[i++] == '-';
  std::string digits;
  std::int32_t frac = 0;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    char c = text[i];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_point) ++frac;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      break;
    }
  }
  if (digits.empty()) fail();
  std::int64_t exponent = 0;
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool eneg = false;
    if (i < text.size() && (text[i] == '+' || text[i] == '-')) eneg = text[i++] == '-';
    std::size_t start = i;
    for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i) {
      exponent = exponent * 10 + (text[i] - '0');
      if (exponent > 100000) fail();
    }
    if (i == start) fail();
    if (eneg) exponent = -exponent;
  }
  if (i != text.size()) fail();
  // cpp_int reads a leading 0 as an octal prefix.
  auto nz = digits.find_first_not_of('0');
  BigInt unscaled(nz == std::string::npos ? std::string("0") : digits.substr(nz));
  if (negative) unscaled = -unscaled;
  return Decimal(std::move(unscaled), static_cast<std::int32_t>(frac - exponent));
}

std::string Decimal::to_string() const {
  BigInt mag = unscaled_ < 0 ? BigInt(-unscaled_) : unscaled_;
  std::string digits = mag.str();
  if (scale_ > 0) {
    if (digits.size() <= static_cast<std::size_t>(scale_))
      digits.insert(0, static_cast<std::size_t>(scale_) - digits.size() + 1, '0');
    digits.insert(digits.size() - static_cast<std::size_t>(scale_), ".");
  }
  return (unscaled_ < 0 ? "-" : "") + digits;
}

std::string Decimal::normalized() const {
  BigInt u = unscaled_;
  std::int32_t s = scale_;
  while (s > 0 && u % 10 == 0) {
    u /= 10;
    --s;
  }
  return Decimal(u, s).to_string();
}

long double Decimal::to_long_double() const { return std::strtold(to_string().c_str(), nullptr); }

std::strong_ordering Decimal::compare_value(const Decimal& other) const {
  BigInt a = unscaled_, b = other.unscaled_;
  if (scale_ < other.scale_)
    a *= pow10(other.scale_ - scale_);
  else if (other.scale_ < scale_)
    b *= pow10(scale_ - other.scale_);
  if (a < b) return std::strong_ordering::less;
  if (a > b) return std::strong_ordering::greater;
  return std::strong_ordering::equal;
}

}  // namespace poly
