#pragma once

// Synthetic single-occupant household: appliances driven by daily routine
// templates, metered through a 15-minute cumulative energy register.
//
// Each simulated day picks one routine template (by the persona's template
// weights). A template is a 96-slot activity vector in wall-clock time; it
// gates every scheduled-burst appliance entry (activation probability is
// scaled by the template's mean weight over the entry's start window) and
// places the start inside that window proportionally to the weights.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "meterwatch/civil_time.hpp"
#include "meterwatch/protocol.hpp"
#include "meterwatch/reading.hpp"

namespace meterwatch::sim {

enum class ApplianceMode { continuous_duty_cycle, scheduled_burst, standby };

std::string_view mode_name(ApplianceMode m);
ApplianceMode parse_mode(std::string_view s);

struct ScheduleEntry {
  int start_slot = 0;  // run start window, wall-clock slots [start, end)
  int end_slot = kSlotsPerDay;
  std::uint8_t days_of_week = 0x7F;  // bit 0 = Sunday
  double probability = 1.0;
  double run_minutes = 0;  // 0: use the appliance default

  friend bool operator==(const ScheduleEntry&, const ScheduleEntry&) = default;
};

/// One phase of a programme: `share` of the run length at `level` x power_w.
struct CyclePhase {
  double share = 1.0;
  double level = 1.0;

  friend bool operator==(const CyclePhase&, const CyclePhase&) = default;
};

struct AppliancePattern {
  std::string name;
  double power_w = 0;
  ApplianceMode mode = ApplianceMode::scheduled_burst;
  std::vector<ScheduleEntry> schedule;
  double run_minutes = 15;  // continuous mode: mean on-period of the compressor cycle (0: per-slot duty)
  double run_jitter = 0;  // relative, run length drawn from run*(1 +/- jitter)
  double duty_cycle = 1.0;  // mean on-fraction (thermostat or compressor)
  double duty_jitter = 0;  // continuous mode without a cycle: per-slot absolute jitter of the on-fraction
  double standby_w = 0;  // idle draw of a burst appliance
  std::vector<CyclePhase> cycle;  // empty: flat at duty_cycle
  double start_spread = 15;  // minutes, centred in the slot, over which a run's start is spread

  friend bool operator==(const AppliancePattern&, const AppliancePattern&) = default;
};

struct RoutineTemplate {
  std::string name;
  std::vector<double> weights;  // 96 wall-clock slots, non-negative

  friend bool operator==(const RoutineTemplate&, const RoutineTemplate&) = default;
};

struct HouseholdPersona {
  std::string id;
  std::vector<AppliancePattern> appliances;
  std::vector<RoutineTemplate> templates;
  std::vector<double> template_weights;
  Decimal initial_register = Decimal::from_units(0, kRegisterScale);

  const AppliancePattern* find(std::string_view appliance) const;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;

  friend bool operator==(const HouseholdPersona&, const HouseholdPersona&) = default;
};

enum class AnomalyKind { absence_morning, shifted_morning, evening_baking, full_absence };

std::string_view anomaly_name(AnomalyKind k);
AnomalyKind parse_anomaly(std::string_view s);

/// Parameters (all optional):
///   absence_morning  from_slot=28 to_slot=48
///   shifted_morning  from_slot=24 to_slot=44 shift_minutes=150
///   evening_baking   start_slot=74 duration_minutes=120 (needs an oven;
///                    adds a dishwasher run afterwards when there is one)
///   full_absence     -
struct AnomalyScript {
  AnomalyKind kind = AnomalyKind::full_absence;
  Date day;
  std::map<std::string, double> parameters;

  friend bool operator==(const AnomalyScript&, const AnomalyScript&) = default;
};

struct SimOutput {
  std::string meter_id;
  std::vector<MeterReading> readings;
  std::map<Date, std::string> truth_labels;
  /// Exact simulated mean power for the slot starting at readings[i]
  /// (size readings.size() - 1), before register quantization.
  std::vector<double> slot_power_w;
  /// Share of slot_power_w drawn by scheduled-burst appliances while running.
  std::vector<double> burst_power_w;
};

/// Ids with a built-in persona, "S1".."S4".
const std::vector<std::string>& persona_ids();

/// Built-in persona; throws std::invalid_argument listing valid ids.
HouseholdPersona build_persona(std::string_view id);

/// Activity vector built from raised-cosine bumps over a base level.
struct Bump {
  double from_slot;
  double to_slot;
  double height = 1.0;
};
std::vector<double> activity_weights(std::span<const Bump> bumps, double base = 0.0);

/// Readings at every quarter hour from local midnight of `start` through
/// local midnight after the last day: 96 * n_days + 1 of them when no DST
/// change falls inside the period. Deterministic in (persona, start,
/// n_days, scripts, seed). Throws std::invalid_argument for n_days < 1, a
/// script day outside the period, or a script the persona cannot perform.
SimOutput simulate_period(const HouseholdPersona& persona, Date start, int n_days,
                          std::span<const AnomalyScript> scripts, std::uint64_t seed);

/// Register text as shown by the meter: wrapped to the 10-character field
/// and rendered with 3 decimals, e.g. "000123.456".
std::string register_text(const Decimal& kwh);
Decimal wrap_register(const Decimal& kwh);

struct TimestampedFrame {
  Instant timestamp;
  protocol::Bytes bytes;
};

/// One 1.8.0 readout per reading, as a beacon would forward them.
std::vector<TimestampedFrame> emit_frames(const SimOutput& sim);

}  // namespace meterwatch::sim
