#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "meterwatch/civil_time.hpp"
#include "meterwatch/reading.hpp"

namespace meterwatch::store {

enum class Quality { measured, interpolated, missing };

std::string_view quality_name(Quality q);

/// Mean power over the quarter hour starting at slot_start. Missing samples
/// carry no value.
struct PowerSample {
  std::string meter_id;
  Instant slot_start;
  std::optional<double> mean_power_w;
  Quality quality = Quality::missing;

  friend bool operator==(const PowerSample&, const PowerSample&) = default;
};

struct GridReading {
  Instant boundary;
  double value_kwh = 0.0;  // meaningless when missing
  std::optional<Decimal> exact;  // set for measured points
  Quality quality = Quality::missing;
};

struct StoreStats {
  std::uint64_t readings_accepted = 0;
  std::uint64_t duplicates_dropped = 0;
  std::uint64_t out_of_order = 0;
  std::uint64_t rollovers_detected = 0;

  StoreStats& operator+=(const StoreStats& o) {
    readings_accepted += o.readings_accepted;
    duplicates_dropped += o.duplicates_dropped;
    out_of_order += o.out_of_order;
    rollovers_detected += o.rollovers_detected;
    return *this;
  }
  friend bool operator==(const StoreStats&, const StoreStats&) = default;
};

enum class StoreErrorKind { ConflictingDuplicate, NonMonotonicRegister, InvalidReading };

class StoreError : public std::runtime_error {
 public:
  StoreError(StoreErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  StoreErrorKind kind() const { return kind_; }

 private:
  StoreErrorKind kind_;
};

/// Boundaries from the first quarter hour at or after `from` through the
/// last one at or before `to`.
struct Span {
  Instant from;
  Instant to;
};

inline constexpr std::chrono::seconds kSnapTolerance{90};
inline constexpr std::chrono::minutes kMaxInterpolationGap{60};

/// A decrease is a wrap iff the old value is above 90 % and the new one below
/// 10 % of the register modulus.
bool is_rollover(const Decimal& before, const Decimal& after);

/// after - before, adding the modulus across a rollover.
Decimal register_delta(const Decimal& before, const Decimal& after);

using Series = std::map<Instant, Decimal>;

std::vector<GridReading> align_series(const Series& series, Span span);
std::vector<PowerSample> power_from_grid(const std::string& meter_id, std::span<const GridReading> grid);

/// Readings keyed by (meter, register, timestamp). Ingestion is atomic per
/// batch and idempotent. One writer at a time; readers take a shared lock
/// and never observe a half-applied batch.
///
/// With a log path the store appends every accepted reading as one JSON
/// line and replays the file on construction.
class TelemetryStore {
 public:
  TelemetryStore() = default;
  explicit TelemetryStore(std::filesystem::path log_path);

  TelemetryStore(const TelemetryStore&) = delete;
  TelemetryStore& operator=(const TelemetryStore&) = delete;

  /// Throws StoreError (and applies nothing) on a conflicting duplicate, a
  /// non-monotonic register or a negative value.
  StoreStats ingest(std::span<const MeterReading> batch);

  StoreStats stats() const;
  std::vector<std::string> meters() const;
  bool has_meter(const std::string& meter_id) const;
  std::size_t size() const;

  std::vector<MeterReading> readings(const std::string& meter_id,
                                     protocol::ObisCode reg = protocol::obis::kPositiveActive) const;

  /// First and last reading timestamp for the series, if any.
  std::optional<std::pair<Instant, Instant>> extent(const std::string& meter_id,
                                                    protocol::ObisCode reg = protocol::obis::kPositiveActive) const;

  std::vector<GridReading> align_to_grid(const std::string& meter_id, protocol::ObisCode reg, Span span) const;
  std::vector<PowerSample> mean_power_series(const std::string& meter_id, protocol::ObisCode reg, Span span) const;

  /// Exact equality of the stored readings (not of the counters).
  bool same_contents(const TelemetryStore& other) const;

 private:
  using Key = std::pair<std::string, protocol::ObisCode>;

  StoreStats ingest_locked(std::span<const MeterReading> batch, bool log);

  mutable std::shared_mutex mutex_;
  std::map<Key, Series> series_;
  StoreStats stats_;
  std::optional<std::filesystem::path> log_path_;
  std::ofstream log_;
};

}  // namespace meterwatch::store
