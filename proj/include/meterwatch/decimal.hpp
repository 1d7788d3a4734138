#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace meterwatch {

/// Fixed-point decimal used for register values, so meter text survives
/// parsing and arithmetic without a binary floating-point round trip.
///
/// The value is `units / 10^scale`. Comparison is numeric ("5.0" == "5.00");
/// `to_string()` keeps the scale the value was written with.
class Decimal {
 public:
  static constexpr int kMaxScale = 9;
  static constexpr int kMaxDigits = 18;

  constexpr Decimal() = default;

  static Decimal from_units(std::int64_t units, int scale);

  /// Accepts `[+-]?digits[.digits]`. Returns nullopt on anything else,
  /// including overflow past kMaxDigits significant digits.
  static std::optional<Decimal> try_parse(std::string_view text);

  /// Throws std::invalid_argument when try_parse would fail.
  static Decimal parse(std::string_view text);

  std::int64_t units() const { return units_; }
  int scale() const { return scale_; }
  bool negative() const { return units_ < 0; }

  double to_double() const;
  std::string to_string() const;

  /// Zero-padded rendering with a fixed number of fractional digits, e.g.
  /// to_fixed(10, 3) of 123.456 gives "000123.456". Digits below `frac`
  /// are truncated toward zero.
  std::string to_fixed(int width, int frac) const;

  /// Exact when `scale >= this->scale()`; otherwise truncates toward zero.
  Decimal rescaled(int scale) const;

  friend Decimal operator+(const Decimal& a, const Decimal& b);
  friend Decimal operator-(const Decimal& a, const Decimal& b);
  friend bool operator==(const Decimal& a, const Decimal& b);
  friend std::strong_ordering operator<=>(const Decimal& a, const Decimal& b);

 private:
  constexpr Decimal(std::int64_t units, int scale) : units_(units), scale_(scale) {}

  std::int64_t units_ = 0;
  int scale_ = 0;
};

}  // namespace meterwatch
