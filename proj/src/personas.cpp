// Built-in personas S1..S4. Appliance sets follow the equipment survey of the
// four case-study households; usage rates, timings and ratings are
// configuration defaults chosen to produce the described daily routines.

#include <stdexcept>

#include "meterwatch/load_sim.hpp"

namespace meterwatch::sim {
namespace {

constexpr std::uint8_t kEveryDay = 0x7F;
// Habitual appliances start within a few minutes of the same clock time;
// programmes are built from quarter-hour phases.
constexpr double kRoutineSpread = 2;

// Slot of a wall-clock time, 4 per hour.
constexpr int at(int hour, int minute = 0) { return hour * 4 + minute / 15; }

ScheduleEntry window(int from, int to, double p, double run = 0, std::uint8_t dow = kEveryDay) {
  return {from, to, dow, p, run};
}

AppliancePattern fridge() {
  return {"fridge", 90, ApplianceMode::continuous_duty_cycle, {}, 12, 0.5, 0.4, 0, 0, {}};
}

AppliancePattern led_lighting(std::vector<ScheduleEntry> s) {
  return {"led_lighting", 40, ApplianceMode::scheduled_burst, std::move(s), 150, 0.2, 1.0, 0, 0, {}};
}

AppliancePattern regular_lighting(std::vector<ScheduleEntry> s) {
  return {"regular_lighting", 120, ApplianceMode::scheduled_burst, std::move(s), 120, 0.2, 1.0, 0, 0, {}};
}

AppliancePattern tv(std::vector<ScheduleEntry> s) {
  return {"tv", 60, ApplianceMode::scheduled_burst, std::move(s), 150, 0.2, 1.0, 0, 1.0, {}};
}

AppliancePattern kettle(std::vector<ScheduleEntry> s) {
  return {"kettle", 2000, ApplianceMode::scheduled_burst, std::move(s), 3.5, 0.1, 1.0, 0, 0, {}, kRoutineSpread};
}

// Thermostat-cycled: full power while heating up, then about half.
AppliancePattern oven(std::vector<ScheduleEntry> s) {
  return {"oven", 2200, ApplianceMode::scheduled_burst, std::move(s), 60, 0, 0.6, 0, 0, {{0.25, 1.0}, {0.75, 0.5}}, kRoutineSpread};
}

AppliancePattern hair_dryer(std::vector<ScheduleEntry> s) {
  return {"hair_dryer", 1200, ApplianceMode::scheduled_burst, std::move(s), 4, 0.1, 1.0, 0, 0, {}, kRoutineSpread};
}

AppliancePattern iron(std::vector<ScheduleEntry> s) {
  return {"iron", 1800, ApplianceMode::scheduled_burst, std::move(s), 45, 0, 0.5, 0, 0, {}, kRoutineSpread};
}

// fill, heat, wash, spin, drain
AppliancePattern washing_machine(std::vector<ScheduleEntry> s) {
  return {"washing_machine",
          2000,
          ApplianceMode::scheduled_burst,
          std::move(s),
          120,
          0,
          1.0,
          0,
          0.5,
          {{0.125, 0.05}, {0.25, 1.0}, {0.375, 0.12}, {0.125, 0.25}, {0.125, 0.03}},
          kRoutineSpread};
}

// heat, wash, rinse-heat, dry
AppliancePattern dishwasher(std::vector<ScheduleEntry> s) {
  return {"dishwasher", 1800, ApplianceMode::scheduled_burst, std::move(s), 120, 0, 1.0, 0, 0.5,
          {{0.25, 1.0}, {0.375, 0.08}, {0.125, 1.0}, {0.25, 0.02}}, kRoutineSpread};
}

AppliancePattern air_conditioner(std::vector<ScheduleEntry> s) {
  return {"air_conditioner", 900, ApplianceMode::scheduled_burst, std::move(s), 240, 0, 1.0, 0, 0.5, {}, kRoutineSpread};
}

AppliancePattern alarm() {
  return {"alarm", 5, ApplianceMode::standby, {}, 0, 0, 1.0, 0, 0, {}};
}

RoutineTemplate tpl(std::string name, std::initializer_list<Bump> bumps) {
  return {std::move(name), activity_weights(std::span<const Bump>(bumps.begin(), bumps.size()))};
}

// Shared morning and evening routines. A bump is flat over the middle half
// of its span, so entries placed there fire with their own probability:
// 7:15-8:30 for the morning, 19:15-21:30 for the evening.
constexpr Bump kMorning{at(6, 30), at(9, 30)};
constexpr Bump kEvening{at(18), at(23)};
// 10:45-13:00
constexpr Bump kMidday{at(9, 30), at(14, 30)};
// 14:45-17:00
constexpr Bump kLateAfternoon{at(13, 30), at(18, 30)};

ScheduleEntry slot(int from, double p, double run = 0, std::uint8_t dow = kEveryDay) {
  return window(from, from + 1, p, run, dow);
}

HouseholdPersona s1() {
  HouseholdPersona p;
  p.id = "S1";
  p.appliances = {
      led_lighting({slot(at(20), 1.0)}),
      fridge(),
      kettle({slot(at(7, 15), 1.0), slot(at(16), 0.9)}),
      oven({slot(at(7, 30), 1.0, 60), slot(at(15, 30), 1.0, 120)}),
      dishwasher({slot(at(17), 1.0)}),
      hair_dryer({slot(at(8, 15), 0.95)}),
      washing_machine({slot(at(10, 45), 1.0)}),
      iron({slot(at(12, 45), 1.0)}),
      tv({slot(at(7, 45), 0.9, 45), slot(at(19, 30), 0.95)}),
  };
  p.templates = {
      tpl("typical", {kMorning, kEvening}),
      tpl("chores", {kMorning, kMidday, kEvening}),
      tpl("guests", {kMorning, {at(14), at(19)}, kEvening}),
  };
  p.template_weights = {0.4, 0.3, 0.3};
  p.initial_register = Decimal::parse("004512.300");
  return p;
}

HouseholdPersona s2() {
  HouseholdPersona p;
  p.id = "S2";
  p.appliances = {
      regular_lighting({slot(at(20, 30), 0.9)}),
      led_lighting({slot(at(20), 1.0)}),
      fridge(),
      kettle({slot(at(7), 1.0), slot(at(16, 30), 0.9)}),
      oven({slot(at(7, 30), 0.9, 20), slot(at(11, 30), 1.0, 60), slot(at(15, 30), 1.0, 120)}),
      dishwasher({slot(at(17, 15), 1.0)}),
      hair_dryer({slot(at(8), 0.5)}),
      washing_machine({slot(at(10, 45), 1.0)}),
      iron({slot(at(12, 45), 1.0)}),
      tv({slot(at(7, 15), 0.9, 60), slot(at(19, 15), 0.95, 180)}),
      alarm(),
  };
  p.templates = {
      tpl("typical", {kMorning, kEvening}),
      tpl("cleaning", {kMorning, kMidday, kEvening}),
      tpl("guests", {kMorning, {at(14), at(19)}, kEvening}),
  };
  p.template_weights = {0.5, 0.25, 0.25};
  p.initial_register = Decimal::parse("017233.081");
  return p;
}

// Gas cooking, no kettle, no hair-dryer or iron in use: a flat profile with
// an occasional cold wash.
HouseholdPersona s3() {
  HouseholdPersona p;
  p.id = "S3";
  AppliancePattern washer = washing_machine({slot(at(9, 30), 1.0)});
  washer.cycle = {{0.125, 0.05}, {0.625, 0.08}, {0.125, 0.2}, {0.125, 0.03}};  // cold programme
  p.appliances = {
      led_lighting({slot(at(20, 30), 1.0)}),
      fridge(),
      washer,
      tv({window(at(13, 30), at(14, 30), 0.6, 120), window(at(19), at(20), 0.95, 180)}),
  };
  // one broad activity span from late morning to midnight, flat 13:30-20:30
  constexpr Bump day{at(10), at(24)};
  p.templates = {
      tpl("quiet", {day}),
      tpl("laundry", {{at(8, 30), at(10, 30)}, day}),
  };
  p.template_weights = {0.75, 0.25};
  p.initial_register = Decimal::parse("002871.645");
  return p;
}

HouseholdPersona s4() {
  HouseholdPersona p;
  p.id = "S4";
  p.appliances = {
      led_lighting({slot(at(20, 30), 1.0)}),
      fridge(),
      kettle({slot(at(7, 45), 1.0), slot(at(21), 1.0)}),
      oven({slot(at(11, 30), 1.0, 60), slot(at(16, 30), 1.0, 120)}),
      hair_dryer({slot(at(8, 15), 1.0)}),
      washing_machine({slot(at(10, 45), 1.0)}),
      iron({slot(at(12, 45), 1.0)}),
      tv({slot(at(7, 30), 1.0, 60), slot(at(20), 1.0, 120)}),
      air_conditioner({slot(at(15), 1.0)}),
  };
  p.templates = {
      tpl("noon", {kMorning, kMidday, kEvening}),
      tpl("late-afternoon", {kMorning, kLateAfternoon, kEvening}),
      tpl("typical", {kMorning, kEvening}),
  };
  p.template_weights = {0.25, 0.25, 0.5};
  p.initial_register = Decimal::parse("009104.772");
  return p;
}

}  // namespace

const std::vector<std::string>& persona_ids() {
  static const std::vector<std::string> ids{"S1", "S2", "S3", "S4"};
  return ids;
}

HouseholdPersona build_persona(std::string_view id) {
  if (id == "S1") return s1();
  if (id == "S2") return s2();
  if (id == "S3") return s3();
  if (id == "S4") return s4();
  throw std::invalid_argument("unknown persona '" + std::string(id) + "' (valid ids: S1, S2, S3, S4)");
}

}  // namespace meterwatch::sim
