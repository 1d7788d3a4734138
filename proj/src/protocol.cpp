#include "meterwatch/protocol.hpp"

#include <algorithm>

namespace meterwatch::protocol {
namespace {

constexpr std::string_view kRequest = "/?!\r\n";
constexpr std::string_view kTerminator = "!\r\n";

std::optional<std::uint8_t> parse_component(std::string_view s) {
  if (s.empty() || s.size() > 2) return std::nullopt;
  if (s.size() == 2 && s[0] == '0') return std::nullopt;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    v = v * 10 + (c - '0');
  }
  return std::uint8_t(v);
}

bool forbidden_in_value(char c) {
  return c == '(' || c == ')' || c == '*' || c == '\r' || c == '\n' || c == char(kStx) || c == char(kEtx);
}

std::optional<Unit> parse_unit(std::string_view s) {
  if (s == "kWh") return Unit::kWh;
  if (s == "kvarh") return Unit::kvarh;
  return std::nullopt;
}

std::optional<DataLine> parse_line_text(std::string_view s) {
  const auto open = s.find('(');
  if (open == std::string_view::npos || s.empty() || s.back() != ')') return std::nullopt;
  auto code = ObisCode::try_parse(s.substr(0, open));
  if (!code) return std::nullopt;
  std::string_view inner = s.substr(open + 1, s.size() - open - 2);
  DataLine line{*code, {}, Unit::none};
  const auto star = inner.find('*');
  if (star != std::string_view::npos) {
    auto unit = parse_unit(inner.substr(star + 1));
    if (!unit) return std::nullopt;
    line.unit = *unit;
    inner = inner.substr(0, star);
  }
  if (std::any_of(inner.begin(), inner.end(), forbidden_in_value)) return std::nullopt;
  line.value = std::string(inner);
  return line;
}

std::string_view as_text(ByteView b) {
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

}  // namespace

std::optional<ObisCode> ObisCode::try_parse(std::string_view text) {
  const auto d1 = text.find('.');
  if (d1 == std::string_view::npos) return std::nullopt;
  const auto d2 = text.find('.', d1 + 1);
  if (d2 == std::string_view::npos) return std::nullopt;
  auto c = parse_component(text.substr(0, d1));
  auto q = parse_component(text.substr(d1 + 1, d2 - d1 - 1));
  auto t = parse_component(text.substr(d2 + 1));
  if (!c || !q || !t) return std::nullopt;
  return ObisCode{*c, *q, *t};
}

ObisCode ObisCode::parse(std::string_view text) {
  auto code = try_parse(text);
  if (!code) throw std::invalid_argument("invalid OBIS code '" + std::string(text) + "' (want C.Q.T, each 0..99)");
  return *code;
}

std::string ObisCode::to_string() const {
  return std::to_string(channel) + '.' + std::to_string(quantity) + '.' + std::to_string(tariff);
}

std::string_view unit_name(Unit u) {
  switch (u) {
    case Unit::kWh: return "kWh";
    case Unit::kvarh: return "kvarh";
    case Unit::none: return "";
  }
  return "";
}

std::string_view error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyPayload: return "EmptyPayload";
    case ErrorKind::InvalidValue: return "InvalidValue";
    case ErrorKind::MissingStx: return "MissingStx";
    case ErrorKind::MissingEtx: return "MissingEtx";
    case ErrorKind::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::TrailingBytes: return "TrailingBytes";
    case ErrorKind::MalformedValue: return "MalformedValue";
    case ErrorKind::MalformedIdentification: return "MalformedIdentification";
  }
  return "?";
}

Bytes encode_request() {
  return Bytes(kRequest.begin(), kRequest.end());
}

bool is_request(ByteView bytes) {
  return as_text(bytes) == kRequest;
}

Bytes encode_identification(const IdentificationMessage& id) {
  const bool ok_mfr = id.manufacturer.size() == 3 && std::all_of(id.manufacturer.begin(), id.manufacturer.end(), is_upper);
  const bool ok_baud = (id.baud_id >= '0' && id.baud_id <= '9') || is_upper(id.baud_id);
  const bool ok_ident = !id.identifier.empty() && id.identifier.size() <= 16 &&
                        std::all_of(id.identifier.begin(), id.identifier.end(),
                                    [](char c) { return c >= 0x20 && c <= 0x7E && c != '/' && c != '!'; });
  if (!ok_mfr || !ok_baud || !ok_ident) {
    throw ProtocolError(ErrorKind::MalformedIdentification, "identification fields out of range");
  }
  std::string s = "/" + id.manufacturer + id.baud_id + id.identifier + "\r\n";
  return Bytes(s.begin(), s.end());
}

IdentificationMessage parse_identification(ByteView bytes) {
  const std::string_view s = as_text(bytes);
  if (s.size() < 8 || s.front() != '/' || s.substr(s.size() - 2) != "\r\n") {
    throw ProtocolError(ErrorKind::MalformedIdentification, "identification must be /MMMZIdent<CR><LF>");
  }
  IdentificationMessage id{std::string(s.substr(1, 3)), s[4], std::string(s.substr(5, s.size() - 7))};
  // re-encode to validate every field with one set of rules
  if (encode_identification(id) != Bytes(bytes.begin(), bytes.end())) {
    throw ProtocolError(ErrorKind::MalformedIdentification, "identification does not round-trip");
  }
  return id;
}

std::uint8_t compute_bcc(ByteView payload) {
  if (payload.empty()) throw ProtocolError(ErrorKind::EmptyPayload, "BCC over empty payload");
  std::uint8_t bcc = 0;
  for (std::uint8_t b : payload) bcc ^= b;
  return bcc;
}

std::string serialize_line(const DataLine& line) {
  std::string out = line.address.to_string();
  out += '(';
  out += line.value;
  if (line.unit != Unit::none) {
    out += '*';
    out += unit_name(line.unit);
  }
  out += ")\r\n";
  return out;
}

Bytes encode_readout(std::span<const DataLine> lines) {
  Bytes out;
  out.push_back(kStx);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& v = lines[i].value;
    if (std::any_of(v.begin(), v.end(), forbidden_in_value)) {
      throw ProtocolError(ErrorKind::InvalidValue, "forbidden character in value of line " + std::to_string(i), i);
    }
    const ObisCode& a = lines[i].address;
    if (a.channel > 99 || a.quantity > 99 || a.tariff > 99) {
      throw ProtocolError(ErrorKind::InvalidValue, "OBIS component above 99 in line " + std::to_string(i), i);
    }
    const std::string text = serialize_line(lines[i]);
    out.insert(out.end(), text.begin(), text.end());
  }
  out.insert(out.end(), kTerminator.begin(), kTerminator.end());
  out.push_back(kEtx);
  out.push_back(compute_bcc(ByteView(out).subspan(1)));
  return out;
}

std::variant<ReadoutFrame, ProtocolError> try_parse_readout(ByteView bytes) {
  if (bytes.empty() || bytes[0] != kStx) return ProtocolError(ErrorKind::MissingStx, "frame does not start with STX");

  // A frame that ends in ETX+BCC is taken whole; only otherwise is the first
  // ETX used, leaving what follows its BCC as trailing bytes. This keeps a
  // body byte corrupted into ETX from masquerading as a shorter frame.
  std::size_t etx = 0;
  if (bytes.size() >= 3 && bytes[bytes.size() - 2] == kEtx) {
    etx = bytes.size() - 2;
  } else {
    const auto it = std::find(bytes.begin() + 1, bytes.end(), kEtx);
    if (it == bytes.end()) return ProtocolError(ErrorKind::MissingEtx, "no ETX in frame");
    etx = std::size_t(it - bytes.begin());
    if (etx + 1 >= bytes.size()) return ProtocolError(ErrorKind::MissingEtx, "frame truncated after ETX (no BCC)");
  }

  const std::uint8_t expected = compute_bcc(bytes.subspan(1, etx));
  const std::uint8_t found = bytes[etx + 1];
  if (expected != found) {
    return ProtocolError(ErrorKind::ChecksumMismatch, "BCC mismatch", 0, expected, found);
  }
  if (etx + 2 < bytes.size()) {
    return ProtocolError(ErrorKind::TrailingBytes,
                        std::to_string(bytes.size() - etx - 2) + " trailing byte(s) after BCC", etx + 2);
  }

  ReadoutFrame frame;
  frame.bcc = found;
  std::string_view body = as_text(bytes.subspan(1, etx - 1));
  for (std::size_t index = 0;; ++index) {
    const auto eol = body.find("\r\n");
    if (eol == std::string_view::npos) {
      return ProtocolError(ErrorKind::MalformedLine, "line " + std::to_string(index) + " not terminated", index);
    }
    const std::string_view text = body.substr(0, eol);
    body.remove_prefix(eol + 2);
    if (text == "!") {
      if (!body.empty()) {
        return ProtocolError(ErrorKind::MalformedLine, "data after end-of-readout marker", index + 1);
      }
      return frame;
    }
    auto line = parse_line_text(text);
    if (!line) return ProtocolError(ErrorKind::MalformedLine, "malformed data line " + std::to_string(index), index);
    frame.lines.push_back(std::move(*line));
  }
}

ReadoutFrame parse_readout(ByteView bytes) {
  auto result = try_parse_readout(bytes);
  if (auto* error = std::get_if<ProtocolError>(&result)) throw *error;
  return std::get<ReadoutFrame>(std::move(result));
}

std::optional<Decimal> extract_energy(const ReadoutFrame& frame, ObisCode code) {
  for (const DataLine& line : frame.lines) {
    if (line.address != code) continue;
    auto value = Decimal::try_parse(line.value);
    if (!value) {
      throw ProtocolError(ErrorKind::MalformedValue,
                          "register " + code.to_string() + " value '" + line.value + "' is not a decimal");
    }
    return value;
  }
  return std::nullopt;
}

}  // namespace meterwatch::protocol
