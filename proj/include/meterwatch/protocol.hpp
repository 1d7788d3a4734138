#pragma once

// Mode-C style subset of the IEC 62056-21 optical readout:
//
//   sign-on request      /?!<CR><LF>
//   identification       /MMMZIdent<CR><LF>
//   data readout         <STX>line...!<CR><LF><ETX><BCC>
//
// with data lines of the form `C.Q.T(VALUE*UNIT)<CR><LF>`. The grammar is
// written out in docs/readout-grammar.ebnf. Baud switching, programming mode
// and multi-block readouts are not supported.

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "meterwatch/decimal.hpp"

namespace meterwatch::protocol {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline constexpr std::uint8_t kStx = 0x02;
inline constexpr std::uint8_t kEtx = 0x03;

/// Reduced OBIS identifier "C.Q.T" (channel, measured quantity, tariff).
struct ObisCode {
  std::uint8_t channel = 0;
  std::uint8_t quantity = 0;
  std::uint8_t tariff = 0;

  /// Each component is 0..99 written without leading zeros, so that
  /// to_string(parse(s)) == s for every accepted s.
  static std::optional<ObisCode> try_parse(std::string_view text);
  static ObisCode parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const ObisCode&, const ObisCode&) = default;
};

namespace obis {
inline constexpr ObisCode kPositiveActive{1, 8, 0};
inline constexpr ObisCode kNegativeActive{2, 8, 0};
inline constexpr ObisCode kPositiveReactive{3, 8, 0};
inline constexpr ObisCode kNegativeReactive{4, 8, 0};
inline constexpr ObisCode kAbsoluteActive{15, 8, 0};
}  // namespace obis

enum class Unit { kWh, kvarh, none };

std::string_view unit_name(Unit u);

struct DataLine {
  ObisCode address;
  std::string value;  // exact text as it appears on the wire
  Unit unit = Unit::kWh;

  friend bool operator==(const DataLine&, const DataLine&) = default;
};

struct ReadoutFrame {
  std::vector<DataLine> lines;
  std::uint8_t bcc = 0;

  friend bool operator==(const ReadoutFrame&, const ReadoutFrame&) = default;
};

struct IdentificationMessage {
  std::string manufacturer;  // three letters A-Z
  char baud_id = '5';
  std::string identifier;  // 1..16 printable characters

  friend bool operator==(const IdentificationMessage&, const IdentificationMessage&) = default;
};

enum class ErrorKind {
  EmptyPayload,
  InvalidValue,  // encoding: forbidden character in value text
  MissingStx,
  MissingEtx,
  ChecksumMismatch,
  MalformedLine,
  TrailingBytes,
  MalformedValue,
  MalformedIdentification,
};

std::string_view error_kind_name(ErrorKind k);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ErrorKind kind, std::string what, std::size_t index = 0, std::uint8_t expected = 0,
                std::uint8_t found = 0)
      : std::runtime_error(std::move(what)), kind_(kind), index_(index), expected_(expected), found_(found) {}

  ErrorKind kind() const { return kind_; }
  /// Line index for MalformedLine/InvalidValue, byte offset for TrailingBytes.
  std::size_t index() const { return index_; }
  /// BCC computed over the received bytes (ChecksumMismatch only).
  std::uint8_t expected_bcc() const { return expected_; }
  /// BCC byte that was received (ChecksumMismatch only).
  std::uint8_t found_bcc() const { return found_; }

 private:
  ErrorKind kind_;
  std::size_t index_;
  std::uint8_t expected_;
  std::uint8_t found_;
};

/// The five bytes `/?!\r\n`.
Bytes encode_request();
bool is_request(ByteView bytes);

Bytes encode_identification(const IdentificationMessage& id);
IdentificationMessage parse_identification(ByteView bytes);

/// XOR of every byte. `payload` is everything after STX up to and including
/// ETX. Throws ProtocolError(EmptyPayload) on an empty payload.
std::uint8_t compute_bcc(ByteView payload);

std::string serialize_line(const DataLine& line);

Bytes encode_readout(std::span<const DataLine> lines);

/// Validates framing and checksum before looking at line syntax, so any
/// corruption of the body surfaces as ChecksumMismatch.
ReadoutFrame parse_readout(ByteView bytes);

/// parse_readout without the throw, for callers that expect bad input.
std::variant<ReadoutFrame, ProtocolError> try_parse_readout(ByteView bytes);

/// Value of the first line addressed by `code`, or nullopt. Throws
/// ProtocolError(MalformedValue) when that line's text is not a decimal.
std::optional<Decimal> extract_energy(const ReadoutFrame& frame, ObisCode code);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace meterwatch::protocol
