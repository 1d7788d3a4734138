#include "meterwatch/io.hpp"

#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace meterwatch::io {
namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

[[noreturn]] void fail_at(std::size_t lineno, const std::string& why) {
  throw FormatError("line " + std::to_string(lineno) + ": " + why);
}

void check_meter_id(std::string_view id, std::size_t lineno) {
  if (id.empty()) fail_at(lineno, "empty meter_id");
  for (char c : id) {
    if (c == ',' || c == '"' || static_cast<unsigned char>(c) < 0x20) fail_at(lineno, "invalid character in meter_id");
  }
}

std::vector<MeterReading> read_readings_body(std::istream& in, std::size_t lineno) {
  std::vector<MeterReading> out;
  std::string line;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 4) fail_at(lineno, "expected 4 fields, got " + std::to_string(f.size()));
    check_meter_id(f[0], lineno);
    const auto t = try_parse_rfc3339(f[1]);
    if (!t) fail_at(lineno, "bad timestamp '" + std::string(f[1]) + "'");
    const auto code = protocol::ObisCode::try_parse(f[2]);
    if (!code) fail_at(lineno, "bad OBIS code '" + std::string(f[2]) + "'");
    const auto v = Decimal::try_parse(f[3]);
    if (!v) fail_at(lineno, "bad value_kwh '" + std::string(f[3]) + "'");
    out.push_back({std::string(f[0]), *t, *code, *v});
  }
  if (out.empty()) throw FormatError("no readings");
  return out;
}

std::vector<MeterReading> read_frames_body(std::istream& in, std::size_t lineno) {
  std::vector<MeterReading> out;
  std::string line;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 3) fail_at(lineno, "expected 3 fields, got " + std::to_string(f.size()));
    check_meter_id(f[0], lineno);
    const auto t = try_parse_rfc3339(f[1]);
    if (!t) fail_at(lineno, "bad timestamp '" + std::string(f[1]) + "'");
    try {
      const auto frame = protocol::parse_readout(from_hex(f[2]));
      if (auto v = protocol::extract_energy(frame, protocol::obis::kPositiveActive)) {
        out.push_back({std::string(f[0]), *t, protocol::obis::kPositiveActive, *v});
      }
    } catch (const std::exception& e) {
      fail_at(lineno, e.what());
    }
  }
  if (out.empty()) throw FormatError("no readings");
  return out;
}

json number_array(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

void write_readings_csv(std::ostream& out, std::span<const MeterReading> readings) {
  out << kReadingsHeader << '\n';
  for (const auto& r : readings) {
    out << r.meter_id << ',' << format_rfc3339(r.timestamp) << ',' << r.register_code.to_string() << ','
        << r.value_kwh.to_string() << '\n';
  }
}

std::vector<MeterReading> read_readings_csv(std::istream& in) {
  std::string header;
  if (!next_line(in, header) || header.empty()) throw FormatError("no readings");
  if (header != kReadingsHeader) fail_at(1, std::string("expected header '") + kReadingsHeader + "'");
  return read_readings_body(in, 1);
}

void write_frames_csv(std::ostream& out, const std::string& meter_id, std::span<const sim::TimestampedFrame> frames) {
  out << kFramesHeader << '\n';
  for (const auto& f : frames) out << meter_id << ',' << format_rfc3339(f.timestamp) << ',' << to_hex(f.bytes) << '\n';
}

std::vector<MeterReading> read_frames_csv(std::istream& in) {
  std::string header;
  if (!next_line(in, header) || header.empty()) throw FormatError("no readings");
  if (header != kFramesHeader) fail_at(1, std::string("expected header '") + kFramesHeader + "'");
  return read_frames_body(in, 1);
}

std::vector<MeterReading> read_any_csv(std::istream& in) {
  std::string header;
  if (!next_line(in, header) || header.empty()) throw FormatError("no readings");
  if (header == kReadingsHeader) return read_readings_body(in, 1);
  if (header == kFramesHeader) return read_frames_body(in, 1);
  fail_at(1, std::string("unknown header; expected '") + kReadingsHeader + "' or '" + kFramesHeader + "'");
}

std::string to_hex(protocol::ByteView bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xF]);
  }
  return s;
}

protocol::Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw FormatError("odd number of hex digits");
  protocol::Bytes out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw FormatError("invalid hex digit");
    out.push_back(std::uint8_t(hi << 4 | lo));
  }
  return out;
}

void write_profiles_csv(std::ostream& out, std::span<const analytics::DailyProfile> profiles) {
  out << "meter_id,day,completeness";
  for (int s = 0; s < kSlotsPerDay; ++s) {
    char name[8];
    std::snprintf(name, sizeof name, "s%02d", s);
    out << ',' << name;
  }
  out << '\n';
  char buf[32];
  for (const auto& p : profiles) {
    std::snprintf(buf, sizeof buf, "%.6g", p.completeness);
    out << p.meter_id << ',' << format_date(p.day) << ',' << buf;
    for (double v : p.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::vector<analytics::DailyProfile> read_profiles_csv(std::istream& in) {
  std::string line;
  if (!next_line(in, line)) throw FormatError("no profiles");
  std::size_t lineno = 1;
  if (split(line, ',').size() != std::size_t(3 + kSlotsPerDay)) fail_at(lineno, "expected 99 columns");
  std::vector<analytics::DailyProfile> out;
  while (next_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != std::size_t(3 + kSlotsPerDay)) fail_at(lineno, "expected 99 columns");
    analytics::DailyProfile p;
    p.meter_id = std::string(f[0]);
    try {
      p.day = parse_date(f[1]);
      p.completeness = std::stod(std::string(f[2]));
      for (int s = 0; s < kSlotsPerDay; ++s) p.values.push_back(std::stod(std::string(f[std::size_t(3 + s)])));
    } catch (const std::exception& e) {
      fail_at(lineno, e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

json reading_to_json(const MeterReading& r) {
  return {{"meter_id", r.meter_id},
          {"timestamp", format_rfc3339(r.timestamp)},
          {"obis", r.register_code.to_string()},
          {"value_kwh", r.value_kwh.to_string()}};
}

MeterReading reading_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("reading must be a JSON object");
  auto text = [&](const char* key) -> std::string {
    if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
    const json& v = j.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number() && std::string_view(key) == "value_kwh") return v.dump();
    throw FormatError(std::string("field '") + key + "' must be a string");
  };
  MeterReading r;
  r.meter_id = text("meter_id");
  if (r.meter_id.empty()) throw FormatError("empty meter_id");
  const auto t = try_parse_rfc3339(text("timestamp"));
  if (!t) throw FormatError("bad timestamp");
  r.timestamp = *t;
  const std::string obis = j.contains("obis") ? text("obis") : protocol::obis::kPositiveActive.to_string();
  const auto code = protocol::ObisCode::try_parse(obis);
  if (!code) throw FormatError("bad OBIS code '" + obis + "'");
  r.register_code = *code;
  const std::string value = text("value_kwh");
  const auto v = Decimal::try_parse(value);
  if (!v) throw FormatError("bad value_kwh '" + value + "'");
  r.value_kwh = *v;
  return r;
}

std::vector<MeterReading> read_ndjson(std::string_view body) {
  std::vector<MeterReading> out;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t end = body.find('\n', start);
    if (end == std::string_view::npos) end = body.size();
    std::string_view line = body.substr(start, end - start);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      try {
        out.push_back(reading_from_json(json::parse(line)));
      } catch (const std::exception& e) {
        fail_at(lineno, e.what());
      }
    }
    start = end + 1;
  }
  return out;
}

json stats_to_json(const store::StoreStats& s) {
  return {{"readings_accepted", s.readings_accepted},
          {"duplicates_dropped", s.duplicates_dropped},
          {"out_of_order", s.out_of_order},
          {"rollovers_detected", s.rollovers_detected}};
}

json power_to_json(std::span<const store::PowerSample> samples) {
  json a = json::array();
  for (const auto& s : samples) {
    a.push_back({{"meter_id", s.meter_id},
                 {"slot_start", format_rfc3339(s.slot_start)},
                 {"mean_power_w", s.mean_power_w ? json(*s.mean_power_w) : json(nullptr)},
                 {"quality", std::string(store::quality_name(s.quality))}});
  }
  return a;
}

json truth_to_json(const sim::SimOutput& sim) {
  json labels = json::object();
  for (const auto& [day, label] : sim.truth_labels) labels[format_date(day)] = label;
  return {{"meter_id", sim.meter_id}, {"labels", labels}};
}

json model_to_json(const std::string& meter_id, const analytics::ClusterModel& m) {
  json centroids = json::array();
  for (const auto& c : m.centroids) centroids.push_back(number_array(c));
  json assignments = json::object();
  for (const auto& [day, c] : m.assignments) assignments[format_date(day)] = c;
  return {{"meter_id", meter_id},
          {"k", m.k},
          {"seed", m.seed},
          {"restarts", m.restarts},
          {"iterations", m.iterations},
          {"inertia", m.inertia},
          {"inertia_trace", number_array(m.inertia_trace)},
          {"centroids", centroids},
          {"assignments", assignments}};
}

json selection_to_json(const std::string& meter_id, const analytics::KSelectionReport& r) {
  return {{"meter_id", meter_id},
          {"inertia", number_array(r.inertia)},
          {"relative_drop", number_array(r.relative_drop)},
          {"recommended_k", r.recommended_k},
          {"degenerate", r.degenerate},
          {"max_pairwise_distance", r.max_pairwise_distance},
          {"knee_drop", analytics::kKneeDrop},
          {"degenerate_floor_w", analytics::kDegenerateFloorW}};
}

json anomalies_to_json(const std::string& meter_id, const analytics::AnomalyReport& r, int k, std::size_t top_n) {
  json ranked = json::array();
  for (const Date& d : r.ranked_days) {
    const bool flagged = r.scores.at(d) > r.threshold;
    ranked.push_back(
        {{"day", format_date(d)}, {"score", r.scores.at(d)}, {"nearest_cluster", r.nearest.at(d)}, {"flagged", flagged}});
  }
  json flagged = json::array();
  for (const Date& d : r.flagged) flagged.push_back(format_date(d));
  json top = json::array();
  for (const Date& d : analytics::top_days(r, top_n)) top.push_back(format_date(d));
  return {{"meter_id", meter_id},
          {"k", k},
          {"threshold", r.threshold},
          {"threshold_rule", threshold_rule_name(r.rule)},
          {"ranked", ranked},
          {"flagged", flagged},
          {"top", top}};
}

json excluded_to_json(std::span<const analytics::ExcludedDay> excluded) {
  json a = json::array();
  for (const auto& e : excluded) a.push_back({{"day", format_date(e.day)}, {"reason", e.reason}});
  return a;
}

json persona_to_json(const sim::HouseholdPersona& p) {
  json apps = json::array();
  for (const auto& a : p.appliances) {
    json schedule = json::array();
    for (const auto& e : a.schedule) {
      schedule.push_back({{"start_slot", e.start_slot},
                          {"end_slot", e.end_slot},
                          {"days_of_week", e.days_of_week},
                          {"probability", e.probability},
                          {"run_minutes", e.run_minutes}});
    }
    json cycle = json::array();
    for (const auto& c : a.cycle) cycle.push_back({{"share", c.share}, {"level", c.level}});
    apps.push_back({{"name", a.name},
                    {"power_w", a.power_w},
                    {"mode", std::string(sim::mode_name(a.mode))},
                    {"schedule", schedule},
                    {"run_minutes", a.run_minutes},
                    {"run_jitter", a.run_jitter},
                    {"duty_cycle", a.duty_cycle},
                    {"duty_jitter", a.duty_jitter},
                    {"standby_w", a.standby_w},
                    {"cycle", cycle},
                    {"start_spread", a.start_spread}});
  }
  json templates = json::array();
  for (const auto& t : p.templates) templates.push_back({{"name", t.name}, {"weights", number_array(t.weights)}});
  return {{"id", p.id},
          {"appliances", apps},
          {"routine_templates", templates},
          {"template_weights", number_array(p.template_weights)},
          {"initial_register_kwh", p.initial_register.to_string()}};
}

sim::HouseholdPersona persona_from_json(const json& j) {
  try {
    sim::HouseholdPersona p;
    p.id = j.at("id").get<std::string>();
    for (const auto& a : j.at("appliances")) {
      sim::AppliancePattern ap;
      ap.name = a.at("name").get<std::string>();
      ap.power_w = a.at("power_w").get<double>();
      ap.mode = sim::parse_mode(a.at("mode").get<std::string>());
      for (const auto& e : a.value("schedule", json::array())) {
        sim::ScheduleEntry se;
        se.start_slot = e.at("start_slot").get<int>();
        se.end_slot = e.at("end_slot").get<int>();
        se.days_of_week = e.value("days_of_week", std::uint8_t{0x7F});
        se.probability = e.value("probability", 1.0);
        se.run_minutes = e.value("run_minutes", 0.0);
        ap.schedule.push_back(se);
      }
      ap.run_minutes = a.value("run_minutes", ap.run_minutes);
      ap.run_jitter = a.value("run_jitter", ap.run_jitter);
      ap.duty_cycle = a.value("duty_cycle", ap.duty_cycle);
      ap.duty_jitter = a.value("duty_jitter", ap.duty_jitter);
      ap.standby_w = a.value("standby_w", ap.standby_w);
      ap.start_spread = a.value("start_spread", ap.start_spread);
      for (const auto& c : a.value("cycle", json::array())) {
        ap.cycle.push_back({c.at("share").get<double>(), c.at("level").get<double>()});
      }
      p.appliances.push_back(std::move(ap));
    }
    for (const auto& t : j.at("routine_templates")) {
      p.templates.push_back({t.at("name").get<std::string>(), t.at("weights").get<std::vector<double>>()});
    }
    p.template_weights = j.at("template_weights").get<std::vector<double>>();
    if (j.contains("initial_register_kwh")) p.initial_register = Decimal::parse(j.at("initial_register_kwh").get<std::string>());
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("persona document: ") + e.what());
  }
}

json script_to_json(const sim::AnomalyScript& s) {
  json params = json::object();
  for (const auto& [k, v] : s.parameters) params[k] = v;
  return {{"kind", std::string(sim::anomaly_name(s.kind))}, {"day", format_date(s.day)}, {"parameters", params}};
}

sim::AnomalyScript script_from_json(const json& j) {
  try {
    sim::AnomalyScript s;
    s.kind = sim::parse_anomaly(j.at("kind").get<std::string>());
    s.day = parse_date(j.at("day").get<std::string>());
    const json params = j.value("parameters", json::object());
    for (const auto& [k, v] : params.items()) s.parameters[k] = v.get<double>();
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("anomaly script: ") + e.what());
  }
}

std::string canonical(const json& j) { return j.dump(2) + "\n"; }

std::string threshold_rule_name(analytics::ThresholdRule r) {
  return r == analytics::ThresholdRule::robust ? "robust" : "mean-sd";
}

analytics::ThresholdRule parse_threshold_rule(std::string_view s) {
  if (s == "robust") return analytics::ThresholdRule::robust;
  if (s == "mean-sd") return analytics::ThresholdRule::mean_sd;
  throw std::invalid_argument("unknown threshold rule '" + std::string(s) + "' (valid: robust, mean-sd)");
}

}  // namespace meterwatch::io
