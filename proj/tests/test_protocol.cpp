#include <doctest.h>

#include "meterwatch/protocol.hpp"
#include "oracles.hpp"

using namespace meterwatch;
using namespace meterwatch::protocol;

namespace {

Bytes bytes_of(std::string_view s) { return Bytes(s.begin(), s.end()); }

ErrorKind error_of(ByteView b) {
  try {
    parse_readout(b);
  } catch (const ProtocolError& e) {
    return e.kind();
  }
  FAIL("expected a ProtocolError");
  return ErrorKind::EmptyPayload;
}

const DataLine kLine{obis::kPositiveActive, "000123.456", Unit::kWh};

}  // namespace

TEST_SUITE("protocol") {

TEST_CASE("sign-on request is the five bytes /?!CRLF") {
  CHECK(encode_request() == Bytes{0x2F, 0x3F, 0x21, 0x0D, 0x0A});
  CHECK(is_request(encode_request()));
  CHECK_FALSE(is_request(bytes_of("#?!\r\n")));
  CHECK_FALSE(is_request(bytes_of("/?!\r")));
}

TEST_CASE("bcc") {
  const Bytes tail{0x21, 0x0D, 0x0A, 0x03};
  CHECK(compute_bcc(tail) == oracle::xor_fold(tail));
  CHECK(compute_bcc(tail) == 0x25);
  CHECK(compute_bcc(Bytes{0x7E}) == 0x7E);
  Bytes twice = bytes_of("1.8.0(1*kWh)\r\n");
  twice.insert(twice.end(), twice.begin(), twice.end());
  CHECK(compute_bcc(twice) == 0x00);
  CHECK_THROWS_AS(compute_bcc(Bytes{}), ProtocolError);
}

TEST_CASE("encode a single 1.8.0 line") {
  const Bytes frame = encode_readout(std::vector{kLine});
  const std::string body = "1.8.0(000123.456*kWh)\r\n!\r\n";
  Bytes expected{0x02};
  expected.insert(expected.end(), body.begin(), body.end());
  expected.push_back(0x03);
  expected.push_back(oracle::xor_fold(Bytes(expected.begin() + 1, expected.end())));
  CHECK(frame == expected);

  const auto parsed = parse_readout(frame);
  REQUIRE(parsed.lines.size() == 1);
  CHECK(parsed.lines[0] == kLine);
  CHECK(parsed.bcc == expected.back());
}

TEST_CASE("empty readout") {
  const Bytes frame = encode_readout({});
  CHECK(frame == Bytes{0x02, '!', '\r', '\n', 0x03, 0x25});
  CHECK(parse_readout(frame).lines.empty());
}

TEST_CASE("forbidden characters in a value") {
  for (std::string v : {"12(3", "1)", "2*3", "4\r", "5\n"}) {
    CHECK_THROWS_AS(encode_readout(std::vector{DataLine{obis::kPositiveActive, v, Unit::kWh}}), ProtocolError);
  }
  CHECK_THROWS_AS(encode_readout(std::vector{DataLine{ObisCode{1, 100, 0}, "1", Unit::kWh}}), ProtocolError);
}

TEST_CASE("unit none omits the unit suffix") {
  const DataLine l{ObisCode{0, 9, 1}, "230512", Unit::none};
  CHECK(serialize_line(l) == "0.9.1(230512)\r\n");
  CHECK(parse_readout(encode_readout(std::vector{l})).lines[0] == l);
}

TEST_CASE("checksum errors carry expected and found") {
  Bytes frame = encode_readout(std::vector{kLine});
  const std::uint8_t good = frame.back();
  frame.back() ^= 0x01;
  try {
    parse_readout(frame);
    FAIL("no error");
  } catch (const ProtocolError& e) {
    CHECK(e.kind() == ErrorKind::ChecksumMismatch);
    CHECK(e.expected_bcc() == good);
    CHECK(e.found_bcc() == (good ^ 0x01));
  }
}

TEST_CASE("framing errors") {
  const Bytes frame = encode_readout(std::vector{kLine});
  CHECK(error_of(Bytes(frame.begin() + 1, frame.end())) == ErrorKind::MissingStx);
  CHECK(error_of(Bytes{}) == ErrorKind::MissingStx);
  CHECK(error_of(Bytes(frame.begin(), frame.end() - 2)) == ErrorKind::MissingEtx);
  CHECK(error_of(Bytes(frame.begin(), frame.end() - 1)) == ErrorKind::MissingEtx);

  Bytes trailing = frame;
  trailing.push_back('x');
  trailing.push_back('y');
  try {
    parse_readout(trailing);
    FAIL("no error");
  } catch (const ProtocolError& e) {
    CHECK(e.kind() == ErrorKind::TrailingBytes);
    CHECK(e.index() == frame.size());
  }
}

TEST_CASE("malformed line names its index") {
  auto framed = [](std::string body) {
    Bytes b{0x02};
    b.insert(b.end(), body.begin(), body.end());
    b.push_back(0x03);
    b.push_back(oracle::xor_fold(Bytes(b.begin() + 1, b.end())));
    return b;
  };
  try {
    parse_readout(framed("1.8.0(1*kWh)\r\n1.8(00)\r\n!\r\n"));
    FAIL("no error");
  } catch (const ProtocolError& e) {
    CHECK(e.kind() == ErrorKind::MalformedLine);
    CHECK(e.index() == 1);
  }
  CHECK(error_of(framed("1.8.0(1*Wh)\r\n!\r\n")) == ErrorKind::MalformedLine);
  CHECK(error_of(framed("01.8.0(1)\r\n!\r\n")) == ErrorKind::MalformedLine);
  CHECK(error_of(framed("100.8.0(1)\r\n!\r\n")) == ErrorKind::MalformedLine);
  CHECK(error_of(framed("1.8.0(1)\r\n")) == ErrorKind::MalformedLine);
  CHECK(error_of(framed("!\r\n1.8.0(1)\r\n")) == ErrorKind::MalformedLine);
}

TEST_CASE("obis codes") {
  CHECK(ObisCode::parse("1.8.0") == obis::kPositiveActive);
  CHECK(ObisCode::parse("15.8.0").to_string() == "15.8.0");
  CHECK(ObisCode::parse("99.99.99").to_string() == "99.99.99");
  for (auto bad : {"1.8", "1.8.0.0", "1..0", "a.8.0", "100.1.1", "01.8.0", "", "1.8.0 "}) {
    CHECK_FALSE(ObisCode::try_parse(bad));
  }
  CHECK_THROWS_AS(ObisCode::parse("1.8"), std::invalid_argument);
}

TEST_CASE("extract_energy") {
  const auto frame = parse_readout(encode_readout(std::vector{kLine}));
  const auto e = extract_energy(frame, obis::kPositiveActive);
  REQUIRE(e);
  CHECK(*e == Decimal::parse("123.456"));
  CHECK_FALSE(extract_energy(frame, obis::kNegativeActive));

  const auto bad = parse_readout(encode_readout(std::vector{DataLine{obis::kPositiveActive, "abc", Unit::kWh}}));
  try {
    extract_energy(bad, obis::kPositiveActive);
    FAIL("no error");
  } catch (const ProtocolError& e) {
    CHECK(e.kind() == ErrorKind::MalformedValue);
  }
}

TEST_CASE("first matching line wins") {
  const std::vector<DataLine> lines{{obis::kNegativeActive, "1.000", Unit::kWh},
                                    {obis::kPositiveActive, "2.000", Unit::kWh},
                                    {obis::kPositiveActive, "3.000", Unit::kWh}};
  const auto f = parse_readout(encode_readout(lines));
  CHECK(*extract_energy(f, obis::kPositiveActive) == Decimal::parse("2"));
}

TEST_CASE("identification message") {
  const IdentificationMessage id{"ISK", '5', "MT174-0001"};
  const Bytes b = encode_identification(id);
  CHECK(std::string(b.begin(), b.end()) == "/ISK5MT174-0001\r\n");
  CHECK(parse_identification(b) == id);
  CHECK_THROWS_AS(encode_identification({"Isk", '5', "x"}), ProtocolError);
  CHECK_THROWS_AS(encode_identification({"ISK", '5', ""}), ProtocolError);
  CHECK_THROWS_AS(parse_identification(bytes_of("/ISK5\r\n")), ProtocolError);
  CHECK_THROWS_AS(parse_identification(bytes_of("ISK5MT174\r\n")), ProtocolError);
}

}  // TEST_SUITE
