#pragma once

#include <string>

#include "meterwatch/civil_time.hpp"
#include "meterwatch/decimal.hpp"
#include "meterwatch/protocol.hpp"

namespace meterwatch {

/// One cumulative register value read from one meter.
struct MeterReading {
  std::string meter_id;
  Instant timestamp;
  protocol::ObisCode register_code = protocol::obis::kPositiveActive;
  Decimal value_kwh;

  friend bool operator==(const MeterReading&, const MeterReading&) = default;
};

/// Register field is 10 characters with 3 decimals, so it wraps at 1e6 kWh.
inline constexpr std::int64_t kRegisterModulusKwh = 1'000'000;
inline constexpr int kRegisterScale = 3;
inline constexpr int kRegisterWidth = 10;

}  // namespace meterwatch
