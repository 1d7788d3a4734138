#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

// UTC instants and Europe/Warsaw civil days.
//
// Timestamps are stored in UTC. Daily profiles are cut on the Warsaw civil
// day, so a day has 96 quarter-hour slots except on DST transition days
// (92 in March, 100 in October).

namespace meterwatch {

using Instant = std::chrono::sys_seconds;
using Date = std::chrono::year_month_day;

inline constexpr std::chrono::minutes kSlot{15};
inline constexpr int kSlotsPerDay = 96;

/// "2023-06-15T22:00:00Z"; also accepts numeric offsets ("+02:00") and
/// fractional seconds, which are truncated. Throws std::invalid_argument.
Instant parse_rfc3339(std::string_view text);
std::optional<Instant> try_parse_rfc3339(std::string_view text);

/// Always renders UTC with a `Z` suffix and whole seconds.
std::string format_rfc3339(Instant t);

/// "YYYY-MM-DD". Throws std::invalid_argument.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// True while Central European Summer Time is in effect at `t`.
bool warsaw_is_dst(Instant t);
std::chrono::minutes warsaw_utc_offset(Instant t);

/// UTC instant of 00:00 local time on `d`.
Instant warsaw_midnight(Date d);
Date warsaw_date(Instant t);

/// Number of quarter-hour slots in the civil day `d` (92, 96 or 100).
int warsaw_slots_in_day(Date d);

/// Index of the quarter-hour slot containing `t`, counted from local
/// midnight in elapsed time (so slot 8 on the October change day is the
/// first 02:00, slot 12 the repeated one).
int warsaw_slot_index(Instant t);

/// Local wall-clock slot (minutes since local midnight / 15), which is what
/// routine templates are indexed by.
int warsaw_wall_slot(Instant t);

/// 0 = Sunday .. 6 = Saturday.
unsigned weekday_index(Date d);

/// Start of the quarter-hour containing `t` (UTC quarter-hours coincide with
/// local ones for whole-hour offsets).
Instant floor_to_slot(Instant t);

}  // namespace meterwatch
