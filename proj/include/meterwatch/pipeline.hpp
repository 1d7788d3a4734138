#pragma once

// The analysis pipeline shared by the command line and the service:
// store -> mean power -> daily profiles -> k selection -> k-means -> scores.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "meterwatch/load_sim.hpp"
#include "meterwatch/profile_analytics.hpp"
#include "meterwatch/telemetry_store.hpp"

namespace meterwatch::pipeline {

/// Invalid configuration or arguments (exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Too few usable days for the requested analysis.
class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownMeter : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::vector<std::string> personas{"S1", "S2", "S3", "S4"};
  Date start{std::chrono::year{2023}, std::chrono::June, std::chrono::day{21}};
  int days = 30;
  std::uint64_t seed = 42;
  std::optional<int> k;  // unset: use the k-selection recommendation
  int k_max = analytics::kMaxK;
  int restarts = 10;
  double min_completeness = analytics::kDefaultMinCompleteness;
  std::size_t top_n = 3;
  analytics::ThresholdRule threshold = analytics::ThresholdRule::robust;
  kernels::Exec exec = kernels::Exec::openmp;
  std::filesystem::path out_dir = "out";

  /// Throws UsageError for anything outside the documented ranges.
  void validate() const;
};

/// Overlays the keys present in a JSON config document. Unknown keys are a
/// UsageError so typos do not pass silently.
void apply_json(RunConfig& cfg, const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& cfg);

struct Analysis {
  std::string meter_id;
  analytics::ProfileSet profiles;
  std::optional<analytics::KSelectionReport> selection;  // when there are >= k_max profiles
  analytics::ClusterModel model;
  analytics::AnomalyReport anomalies;
};

/// Profiles from the meter's whole 1.8.0 history.
analytics::ProfileSet meter_profiles(const store::TelemetryStore& store, const std::string& meter_id,
                                     double min_completeness);

/// Throws UnknownMeter or InsufficientData.
Analysis analyze_meter(const store::TelemetryStore& store, const std::string& meter_id, const RunConfig& cfg);

nlohmann::json anomaly_json(const Analysis& a, const RunConfig& cfg);

/// Mean power over [from, to]; both default to the meter's first and last
/// reading. Throws UnknownMeter.
std::vector<store::PowerSample> power_series(const store::TelemetryStore& store, const std::string& meter_id,
                                             std::optional<Instant> from, std::optional<Instant> to);

/// Anomaly days scripted by the case study: S1's three reported days and
/// S2's trip away from home.
std::vector<sim::AnomalyScript> casestudy_scripts(const std::string& persona, Date start, int days);

/// "kind@YYYY-MM-DD[:name=value,...]", e.g. "absence-morning@2023-07-20".
sim::AnomalyScript parse_script_spec(std::string_view spec);

}  // namespace meterwatch::pipeline
