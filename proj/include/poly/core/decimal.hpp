#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace poly {

using BigInt = boost::multiprecision::cpp_int;

/// Exact fixed-point number: value = unscaled * 10^-scale. The scale is kept
/// as decoded so that "1.50" and "1.5" stay distinguishable in storage; only
/// comparisons and canonical text ignore it.
class Decimal {
 public:
  Decimal() = default;
  Decimal(BigInt unscaled, std::int32_t scale);

  /// Parses `[+-]digits[.digits]` (also `.5`, `5.`). Exponent notation is
  /// accepted and folded into the scale. Throws ParseError.
  static Decimal parse(std::string_view text);
  static Decimal from_int(std::int64_t v) { return Decimal(BigInt(v), 0); }

  const BigInt& unscaled() const { return unscaled_; }
  std::int32_t scale() const { return scale_; }

  /// Text preserving the stored scale, e.g. "1.50".
  std::string to_string() const;
  /// Text without trailing fractional zeros, e.g. "1.5", "100", "0".
  std::string normalized() const;

  long double to_long_double() const;
  bool is_zero() const { return unscaled_ == 0; }
  int sign() const { return unscaled_.sign(); }

  // Numeric comparison ignoring scale (1.50 == 1.5).
  std::strong_ordering compare_value(const Decimal& other) const;

  bool operator==(const Decimal&) const = default;

 private:
  BigInt unscaled_{0};
  std::int32_t scale_{0};
};

}  // namespace poly
