#pragma once

// Fixtures shared by the test programs.

#include <chrono>
#include <string>
#include <vector>

#include "meterwatch/load_sim.hpp"
#include "meterwatch/pipeline.hpp"
#include "meterwatch/profile_analytics.hpp"
#include "meterwatch/telemetry_store.hpp"

namespace support {

using namespace meterwatch;

inline const Date kStart{std::chrono::year{2023}, std::chrono::June, std::chrono::day{21}};

/// Profiles on consecutive days from 2023-06-01, one per row.
inline std::vector<analytics::DailyProfile> profiles_from(const std::vector<std::vector<double>>& rows,
                                                          const std::string& meter = "m") {
  std::vector<analytics::DailyProfile> out;
  const std::chrono::sys_days first{std::chrono::year{2023} / std::chrono::June / 1};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.push_back({meter, Date{first + std::chrono::days{int(i)}}, rows[i], 1.0});
  }
  return out;
}

struct SimRun {
  sim::SimOutput sim;
  analytics::ProfileSet profiles;
};

/// Simulator output pushed through the store and the profile builder.
inline SimRun simulate_profiles(const std::string& persona, std::uint64_t seed,
                                const std::vector<sim::AnomalyScript>& scripts = {}, int days = 30) {
  SimRun run;
  run.sim = sim::simulate_period(sim::build_persona(persona), kStart, days, scripts, seed);
  store::TelemetryStore store;
  store.ingest(run.sim.readings);
  run.profiles = pipeline::meter_profiles(store, run.sim.meter_id, analytics::kDefaultMinCompleteness);
  return run;
}

inline std::vector<double> flat(double v) { return std::vector<double>(96, v); }

}  // namespace support
