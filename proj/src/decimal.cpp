#include "meterwatch/decimal.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace meterwatch {
namespace {

constexpr std::int64_t kPow10[] = {1,
                                   10,
                                   100,
                                   1000,
                                   10000,
                                   100000,
                                   1000000,
                                   10000000,
                                   100000000,
                                   1000000000,
                                   10000000000,
                                   100000000000,
                                   1000000000000,
                                   10000000000000,
                                   100000000000000,
                                   1000000000000000,
                                   10000000000000000,
                                   100000000000000000,
                                   1000000000000000000};

std::int64_t widen(std::int64_t units, int from, int to) {
  const std::int64_t factor = kPow10[to - from];
  std::int64_t out = 0;
  if (__builtin_mul_overflow(units, factor, &out)) {
    throw std::overflow_error("decimal rescale overflow");
  }
  return out;
}

}  // namespace

Decimal Decimal::from_units(std::int64_t units, int scale) {
  if (scale < 0 || scale > kMaxScale) throw std::invalid_argument("decimal scale out of range");
  return Decimal(units, scale);
}

std::optional<Decimal> Decimal::try_parse(std::string_view text) {
  std::size_t i = 0;
  bool neg = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) {
    neg = text[i] == '-';
    ++i;
  }
  std::int64_t units = 0;
  int digits = 0;
  int int_digits = 0;
  int scale = 0;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') return std::nullopt;
    if (seen_point) {
      if (++scale > kMaxScale) return std::nullopt;
    } else {
      ++int_digits;
    }
    // leading zeros do not count toward the significant-digit budget
    if (units != 0 || c != '0') ++digits;
    if (digits > kMaxDigits) return std::nullopt;
    units = units * 10 + (c - '0');
  }
  if (int_digits == 0 && scale == 0) return std::nullopt;
  if (seen_point && scale == 0) return std::nullopt;
  if (int_digits == 0) return std::nullopt;
  return Decimal(neg ? -units : units, scale);
}

Decimal Decimal::parse(std::string_view text) {
  auto d = try_parse(text);
  if (!d) throw std::invalid_argument("not a decimal number: '" + std::string(text) + "'");
  return *d;
}

double Decimal::to_double() const {
  return std::strtod(to_string().c_str(), nullptr);
}

std::string Decimal::to_string() const {
  const std::uint64_t mag = units_ < 0 ? std::uint64_t(0) - std::uint64_t(units_) : std::uint64_t(units_);
  std::string digits = std::to_string(mag);
  if (scale_ > 0) {
    if (digits.size() <= std::size_t(scale_)) digits.insert(0, std::size_t(scale_) + 1 - digits.size(), '0');
    digits.insert(digits.size() - std::size_t(scale_), 1, '.');
  }
  if (units_ < 0) digits.insert(0, 1, '-');
  return digits;
}

std::string Decimal::to_fixed(int width, int frac) const {
  Decimal d = rescaled(frac);
  std::string body = (d.units_ < 0 ? Decimal(-d.units_, d.scale_) : d).to_string();
  const std::size_t w = std::size_t(width) - (d.units_ < 0 ? 1 : 0);
  if (body.size() < w) body.insert(0, w - body.size(), '0');
  if (d.units_ < 0) body.insert(0, 1, '-');
  return body;
}

Decimal Decimal::rescaled(int scale) const {
  if (scale < 0 || scale > kMaxScale) throw std::invalid_argument("decimal scale out of range");
  if (scale >= scale_) return Decimal(widen(units_, scale_, scale), scale);
  return Decimal(units_ / kPow10[scale_ - scale], scale);
}

Decimal operator+(const Decimal& a, const Decimal& b) {
  const int s = std::max(a.scale_, b.scale_);
  std::int64_t out = 0;
  if (__builtin_add_overflow(widen(a.units_, a.scale_, s), widen(b.units_, b.scale_, s), &out)) {
    throw std::overflow_error("decimal addition overflow");
  }
  return Decimal(out, s);
}

Decimal operator-(const Decimal& a, const Decimal& b) {
  const int s = std::max(a.scale_, b.scale_);
  std::int64_t out = 0;
  if (__builtin_sub_overflow(widen(a.units_, a.scale_, s), widen(b.units_, b.scale_, s), &out)) {
    throw std::overflow_error("decimal subtraction overflow");
  }
  return Decimal(out, s);
}

bool operator==(const Decimal& a, const Decimal& b) {
  return (a <=> b) == std::strong_ordering::equal;
}

std::strong_ordering operator<=>(const Decimal& a, const Decimal& b) {
  const int s = std::max(a.scale_, b.scale_);
  return widen(a.units_, a.scale_, s) <=> widen(b.units_, b.scale_, s);
}

}  // namespace meterwatch
