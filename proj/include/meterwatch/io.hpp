#pragma once

// File and wire formats: readings CSV, frame logs, profile CSV and the JSON
// documents exchanged by the CLI and the service.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterwatch/load_sim.hpp"
#include "meterwatch/profile_analytics.hpp"
#include "meterwatch/telemetry_store.hpp"

namespace meterwatch::io {

using nlohmann::json;

/// Malformed input; the message names the offending line when there is one.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kReadingsHeader = "meter_id,timestamp,obis,value_kwh";
inline constexpr const char* kFramesHeader = "meter_id,timestamp,frame_hex";

void write_readings_csv(std::ostream& out, std::span<const MeterReading> readings);
/// Throws FormatError("no readings") for an input without data rows.
std::vector<MeterReading> read_readings_csv(std::istream& in);

void write_frames_csv(std::ostream& out, const std::string& meter_id, std::span<const sim::TimestampedFrame> frames);
/// Decodes every frame and keeps its 1.8.0 register; frames without one are
/// skipped. Protocol errors are reported with the line number.
std::vector<MeterReading> read_frames_csv(std::istream& in);

/// Reads either CSV flavour, chosen by the header line.
std::vector<MeterReading> read_any_csv(std::istream& in);

std::string to_hex(protocol::ByteView bytes);
protocol::Bytes from_hex(std::string_view hex);

void write_profiles_csv(std::ostream& out, std::span<const analytics::DailyProfile> profiles);
std::vector<analytics::DailyProfile> read_profiles_csv(std::istream& in);

json reading_to_json(const MeterReading& r);
/// value_kwh may be a JSON string (exact) or number (taken by its literal text).
MeterReading reading_from_json(const json& j);
/// One JSON object per non-blank line.
std::vector<MeterReading> read_ndjson(std::string_view body);

json stats_to_json(const store::StoreStats& s);
json power_to_json(std::span<const store::PowerSample> samples);
json truth_to_json(const sim::SimOutput& sim);

json model_to_json(const std::string& meter_id, const analytics::ClusterModel& m);
json selection_to_json(const std::string& meter_id, const analytics::KSelectionReport& r);
json anomalies_to_json(const std::string& meter_id, const analytics::AnomalyReport& r, int k, std::size_t top_n);
json excluded_to_json(std::span<const analytics::ExcludedDay> excluded);

json persona_to_json(const sim::HouseholdPersona& p);
sim::HouseholdPersona persona_from_json(const json& j);
json script_to_json(const sim::AnomalyScript& s);
sim::AnomalyScript script_from_json(const json& j);

/// Canonical text: sorted keys, two-space indent, trailing newline.
std::string canonical(const json& j);

std::string threshold_rule_name(analytics::ThresholdRule r);
analytics::ThresholdRule parse_threshold_rule(std::string_view s);

}  // namespace meterwatch::io
