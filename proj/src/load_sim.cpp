#include "meterwatch/load_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "meterwatch/rng.hpp"

namespace meterwatch::sim {
namespace {

using std::chrono::days;
using std::chrono::sys_days;

constexpr std::int64_t kRegisterModulusCounts = kRegisterModulusKwh * 1000;

struct Run {
  std::size_t appliance;
  double start_min;  // wall-clock minutes since local midnight
  double duration_min;
};

double param(const AnomalyScript& s, const std::string& key, double fallback) {
  auto it = s.parameters.find(key);
  return it == s.parameters.end() ? fallback : it->second;
}

// Wall-clock minute to elapsed minute since local midnight; DST days shift
// everything after the change (02:00 -> 03:00 in spring, 03:00 -> 02:00 in
// autumn; events in the repeated hour happen the first time round).
double elapsed_minute(double wall, int slots) {
  if (slots == 92) {
    if (wall < 120) return wall;
    if (wall < 180) return 120;
    return wall - 60;
  }
  if (slots == 100) return wall < 180 ? wall : wall + 60;
  return wall;
}

// Adds `watts` drawn over elapsed minutes [a, b) into per-slot W*min bins.
void add_segment(std::vector<double>& bins, double a, double b, double watts) {
  const double day_end = double(bins.size()) * 15.0;
  a = std::clamp(a, 0.0, day_end);
  b = std::clamp(b, 0.0, day_end);
  while (a < b) {
    const auto slot = std::size_t(a / 15.0);
    if (slot >= bins.size()) break;
    const double slot_end = std::min(b, double(slot + 1) * 15.0);
    bins[slot] += watts * (slot_end - a);
    a = slot_end;
  }
}

void check_script(const HouseholdPersona& p, const AnomalyScript& s, Date start, int n_days) {
  const sys_days first{start};
  const sys_days last = first + days{n_days - 1};
  if (sys_days{s.day} < first || sys_days{s.day} > last) {
    throw std::invalid_argument("anomaly script day " + format_date(s.day) + " lies outside the simulated period " +
                                format_date(start) + " .. " + format_date(Date{last}));
  }
  if (s.kind == AnomalyKind::evening_baking && p.find("oven") == nullptr) {
    throw std::invalid_argument("persona " + p.id + " has no oven; cannot script evening_baking");
  }
}

// Minute within the slot, uniform over a window of start_spread minutes
// centred in the slot.
double start_offset(const AppliancePattern& app, double u) {
  const double spread = std::clamp(app.start_spread, 0.0, 15.0);
  return (15.0 - spread) / 2.0 + spread * u;
}

std::size_t pick_template(const HouseholdPersona& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.template_weights.size(); ++i) {
    acc += p.template_weights[i];
    if (u < acc) return i;
  }
  return p.template_weights.size() - 1;
}

std::vector<Run> draw_runs(const HouseholdPersona& p, const RoutineTemplate& tpl, unsigned weekday, Rng& rng) {
  std::vector<Run> runs;
  for (std::size_t a = 0; a < p.appliances.size(); ++a) {
    const AppliancePattern& app = p.appliances[a];
    if (app.mode != ApplianceMode::scheduled_burst) continue;
    for (const ScheduleEntry& e : app.schedule) {
      if (((e.days_of_week >> weekday) & 1U) == 0) continue;
      double total = 0.0;
      for (int s = e.start_slot; s < e.end_slot; ++s) total += tpl.weights[std::size_t(s)];
      const double mean = total / double(e.end_slot - e.start_slot);
      const double gate = std::min(1.0, e.probability * mean);
      // fixed number of draws per entry keeps streams aligned across outcomes
      const double u_on = rng.uniform();
      const double u_slot = rng.uniform();
      const double u_min = rng.uniform();
      const double u_len = rng.uniform();
      if (!(u_on < gate) || total <= 0.0) continue;
      double target = u_slot * total;
      int slot = e.start_slot;
      for (; slot < e.end_slot - 1; ++slot) {
        target -= tpl.weights[std::size_t(slot)];
        if (target < 0.0) break;
      }
      const double base = e.run_minutes > 0 ? e.run_minutes : app.run_minutes;
      const double len = base * (1.0 + app.run_jitter * (2.0 * u_len - 1.0));
      runs.push_back({a, slot * 15.0 + start_offset(app, u_min), std::max(len, 0.0)});
    }
  }
  return runs;
}

void apply_script(const HouseholdPersona& p, const AnomalyScript& s, std::vector<Run>& runs, Rng& rng) {
  switch (s.kind) {
    case AnomalyKind::full_absence:
      runs.clear();
      break;
    case AnomalyKind::absence_morning: {
      const double from = param(s, "from_slot", 28) * 15.0;
      const double to = param(s, "to_slot", 48) * 15.0;
      std::erase_if(runs, [&](const Run& r) { return r.start_min < to && r.start_min + r.duration_min > from; });
      break;
    }
    case AnomalyKind::shifted_morning: {
      const double from = param(s, "from_slot", 24) * 15.0;
      const double to = param(s, "to_slot", 44) * 15.0;
      const double shift = param(s, "shift_minutes", 150);
      for (Run& r : runs) {
        if (r.start_min >= from && r.start_min < to) r.start_min += shift;
      }
      break;
    }
    case AnomalyKind::evening_baking: {
      const auto oven = std::size_t(p.find("oven") - p.appliances.data());
      const double start = param(s, "start_slot", 74) * 15.0 + start_offset(p.appliances[oven], rng.uniform());
      const double duration = param(s, "duration_minutes", 120);
      runs.push_back({oven, start, duration});
      if (const AppliancePattern* dw = p.find("dishwasher")) {
        runs.push_back({std::size_t(dw - p.appliances.data()), start + duration + 30.0, dw->run_minutes});
      }
      break;
    }
  }
}

// Lays one run onto the day's bins; returns nothing, adds into both totals.
void lay_run(const AppliancePattern& app, const Run& r, int slots, std::vector<double>& total,
             std::vector<double>& burst) {
  static const std::vector<CyclePhase> flat{{1.0, -1.0}};
  const auto& phases = app.cycle.empty() ? flat : app.cycle;
  const double share_sum =
      std::accumulate(phases.begin(), phases.end(), 0.0, [](double acc, const CyclePhase& c) { return acc + c.share; });
  double t = r.start_min;
  for (const CyclePhase& ph : phases) {
    const double len = r.duration_min * ph.share / share_sum;
    const double level = ph.level < 0 ? app.duty_cycle : ph.level;
    const double watts = level * app.power_w;
    const double a = elapsed_minute(t, slots);
    const double b = elapsed_minute(t + len, slots);
    add_segment(total, a, b, watts - app.standby_w);
    add_segment(burst, a, b, watts);
    t += len;
  }
}

// Alternating on/off periods with mean on-fraction duty_cycle; the day
// starts at a random point of an off period.
void compressor_cycle(const AppliancePattern& app, std::vector<double>& bins, Rng& rng) {
  const double on_mean = app.run_minutes;
  const double off_mean = on_mean * (1.0 - app.duty_cycle) / app.duty_cycle;
  auto draw = [&](double mean) { return mean * (1.0 + app.run_jitter * (2.0 * rng.uniform() - 1.0)); };
  const double day_end = double(bins.size()) * 15.0;
  double t = -rng.uniform() * draw(off_mean);
  while (t < day_end) {
    t += draw(off_mean);
    const double on = draw(on_mean);
    add_segment(bins, t, t + on, app.power_w);
    t += on;
  }
}

}  // namespace

std::string_view mode_name(ApplianceMode m) {
  switch (m) {
    case ApplianceMode::continuous_duty_cycle: return "continuous-duty-cycle";
    case ApplianceMode::scheduled_burst: return "scheduled-burst";
    case ApplianceMode::standby: return "standby";
  }
  return "";
}

ApplianceMode parse_mode(std::string_view s) {
  if (s == "continuous-duty-cycle") return ApplianceMode::continuous_duty_cycle;
  if (s == "scheduled-burst") return ApplianceMode::scheduled_burst;
  if (s == "standby") return ApplianceMode::standby;
  throw std::invalid_argument("unknown appliance mode '" + std::string(s) + "'");
}

std::string_view anomaly_name(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::absence_morning: return "absence-morning";
    case AnomalyKind::shifted_morning: return "shifted-morning";
    case AnomalyKind::evening_baking: return "evening-baking";
    case AnomalyKind::full_absence: return "full-absence";
  }
  return "";
}

AnomalyKind parse_anomaly(std::string_view s) {
  for (auto k : {AnomalyKind::absence_morning, AnomalyKind::shifted_morning, AnomalyKind::evening_baking,
                 AnomalyKind::full_absence}) {
    if (s == anomaly_name(k)) return k;
  }
  throw std::invalid_argument("unknown anomaly kind '" + std::string(s) +
                              "' (valid: absence-morning, shifted-morning, evening-baking, full-absence)");
}

const AppliancePattern* HouseholdPersona::find(std::string_view appliance) const {
  for (const auto& a : appliances) {
    if (a.name == appliance) return &a;
  }
  return nullptr;
}

void HouseholdPersona::validate() const {
  auto fail = [&](const std::string& why) { throw std::invalid_argument("persona " + id + ": " + why); };
  if (templates.empty()) fail("needs at least one routine template");
  if (templates.size() != template_weights.size()) fail("template_weights must match templates");
  double sum = 0.0;
  for (double w : template_weights) {
    if (!(w >= 0.0)) fail("template weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("template weights must sum to 1");
  for (const auto& t : templates) {
    if (t.weights.size() != std::size_t(kSlotsPerDay)) fail("template " + t.name + " must have 96 slots");
    for (double w : t.weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) fail("template " + t.name + " has a negative weight");
    }
  }
  for (const auto& a : appliances) {
    if (!(a.power_w >= 0.0) || !(a.standby_w >= 0.0)) fail("appliance " + a.name + " has negative power");
    if (a.duty_cycle < 0.0 || a.duty_cycle > 1.0) fail("appliance " + a.name + " duty cycle outside [0,1]");
    for (const auto& e : a.schedule) {
      if (e.start_slot < 0 || e.start_slot >= e.end_slot || e.end_slot > kSlotsPerDay) {
        fail("appliance " + a.name + " schedule needs 0 <= start < end <= 96");
      }
      if (e.probability < 0.0 || e.probability > 1.0) fail("appliance " + a.name + " probability outside [0,1]");
    }
    for (const auto& c : a.cycle) {
      if (c.share < 0.0 || c.level < 0.0) fail("appliance " + a.name + " has a negative cycle phase");
    }
  }
  if (initial_register.negative()) fail("initial register must be non-negative");
}

std::vector<double> activity_weights(std::span<const Bump> bumps, double base) {
  std::vector<double> w(std::size_t(kSlotsPerDay), base);
  for (const Bump& b : bumps) {
    const double width = b.to_slot - b.from_slot;
    for (int s = 0; s < kSlotsPerDay; ++s) {
      const double x = (double(s) + 0.5 - b.from_slot) / width;
      if (x <= 0.0 || x >= 1.0) continue;
      // flat top over the middle half, cosine shoulders
      const double edge = std::min(x, 1.0 - x) * 4.0;
      const double shape = edge >= 1.0 ? 1.0 : 0.5 - 0.5 * std::cos(std::numbers::pi * edge);
      w[std::size_t(s)] = std::max(w[std::size_t(s)], base + b.height * shape);
    }
  }
  return w;
}

SimOutput simulate_period(const HouseholdPersona& persona, Date start, int n_days,
                          std::span<const AnomalyScript> scripts, std::uint64_t seed) {
  persona.validate();
  if (n_days < 1) throw std::invalid_argument("n_days must be at least 1");
  std::map<Date, const AnomalyScript*> by_day;
  for (const auto& s : scripts) {
    check_script(persona, s, start, n_days);
    if (!by_day.emplace(s.day, &s).second) {
      throw std::invalid_argument("more than one anomaly script on " + format_date(s.day));
    }
  }

  SimOutput out;
  out.meter_id = persona.id;
  const std::int64_t initial_counts = wrap_register(persona.initial_register).units();
  double cumulative_wh = 0.0;
  Instant t = warsaw_midnight(start);

  auto push_reading = [&] {
    const auto counts = std::int64_t(std::floor(cumulative_wh + 1e-9));
    const std::int64_t value = (initial_counts + counts) % kRegisterModulusCounts;
    out.readings.push_back({persona.id, t, protocol::obis::kPositiveActive, Decimal::from_units(value, kRegisterScale)});
  };
  push_reading();

  for (int i = 0; i < n_days; ++i) {
    const Date day{sys_days{start} + days{i}};
    const int slots = warsaw_slots_in_day(day);
    Rng rng(mix_seed(seed, std::uint64_t(i)));

    std::vector<double> wmin(std::size_t(slots), 0.0);  // W*min per slot
    std::vector<double> burst(std::size_t(slots), 0.0);

    const std::size_t tpl = pick_template(persona, rng);
    for (const auto& app : persona.appliances) {
      switch (app.mode) {
        case ApplianceMode::standby:
          for (auto& b : wmin) b += app.power_w * 15.0;
          break;
        case ApplianceMode::continuous_duty_cycle:
          if (app.run_minutes > 0 && app.duty_cycle > 0 && app.duty_cycle < 1) {
            compressor_cycle(app, wmin, rng);
          } else {
            for (auto& b : wmin) {
              const double frac = std::clamp(app.duty_cycle + app.duty_jitter * (2.0 * rng.uniform() - 1.0), 0.0, 1.0);
              b += app.power_w * frac * 15.0;
            }
          }
          break;
        case ApplianceMode::scheduled_burst:
          for (auto& b : wmin) b += app.standby_w * 15.0;
          break;
      }
    }

    std::vector<Run> runs = draw_runs(persona, persona.templates[tpl], weekday_index(day), rng);
    std::string label = persona.templates[tpl].name;
    if (auto it = by_day.find(day); it != by_day.end()) {
      apply_script(persona, *it->second, runs, rng);
      label = std::string(anomaly_name(it->second->kind));
    }
    for (const Run& r : runs) lay_run(persona.appliances[r.appliance], r, slots, wmin, burst);
    out.truth_labels[day] = label;

    for (int s = 0; s < slots; ++s) {
      const double watts = wmin[std::size_t(s)] / 15.0;
      out.slot_power_w.push_back(watts);
      out.burst_power_w.push_back(burst[std::size_t(s)] / 15.0);
      cumulative_wh += watts * 0.25;
      t += kSlot;
      push_reading();
    }
  }
  return out;
}

Decimal wrap_register(const Decimal& kwh) {
  const std::int64_t units = kwh.rescaled(kRegisterScale).units();
  const std::int64_t wrapped = ((units % kRegisterModulusCounts) + kRegisterModulusCounts) % kRegisterModulusCounts;
  return Decimal::from_units(wrapped, kRegisterScale);
}

std::string register_text(const Decimal& kwh) {
  return wrap_register(kwh).to_fixed(kRegisterWidth, kRegisterScale);
}

std::vector<TimestampedFrame> emit_frames(const SimOutput& sim) {
  std::vector<TimestampedFrame> frames;
  frames.reserve(sim.readings.size());
  for (const MeterReading& r : sim.readings) {
    const protocol::DataLine line{r.register_code, register_text(r.value_kwh), protocol::Unit::kWh};
    frames.push_back({r.timestamp, protocol::encode_readout(std::span(&line, 1))});
  }
  return frames;
}

}  // namespace meterwatch::sim
