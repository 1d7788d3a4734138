#include "meterwatch/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "meterwatch/io.hpp"

namespace meterwatch::pipeline {
namespace {

using nlohmann::json;
using std::chrono::days;
using std::chrono::sys_days;

Date offset(Date d, int n) { return Date{sys_days{d} + days{n}}; }

}  // namespace

void RunConfig::validate() const {
  if (personas.empty()) throw UsageError("at least one persona is required");
  const auto& ids = sim::persona_ids();
  for (const auto& p : personas) {
    if (std::find(ids.begin(), ids.end(), p) == ids.end()) {
      throw UsageError("unknown persona '" + p + "' (valid ids: S1, S2, S3, S4)");
    }
  }
  if (days < 1) throw UsageError("days must be at least 1");
  if (k_max < 1 || k_max > analytics::kMaxK) throw UsageError("k-range must lie within [1, 6]");
  if (k && (*k < 1 || *k > k_max)) throw UsageError("k must lie within [1, " + std::to_string(k_max) + "]");
  if (restarts < 1) throw UsageError("restarts must be at least 1");
  if (!(min_completeness >= 0.0 && min_completeness <= 1.0)) throw UsageError("min_completeness must be in [0, 1]");
  if (top_n < 1) throw UsageError("top-N must be at least 1");
}

void apply_json(RunConfig& cfg, const json& doc) {
  if (!doc.is_object()) throw UsageError("config file must hold a JSON object");
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "personas") {
        cfg.personas = v.get<std::vector<std::string>>();
      } else if (key == "start") {
        cfg.start = parse_date(v.get<std::string>());
      } else if (key == "days") {
        cfg.days = v.get<int>();
      } else if (key == "seed") {
        cfg.seed = v.get<std::uint64_t>();
      } else if (key == "k") {
        if (v.is_string() && v.get<std::string>() == "auto") {
          cfg.k.reset();
        } else {
          cfg.k = v.get<int>();
        }
      } else if (key == "k_max") {
        cfg.k_max = v.get<int>();
      } else if (key == "restarts") {
        cfg.restarts = v.get<int>();
      } else if (key == "min_completeness") {
        cfg.min_completeness = v.get<double>();
      } else if (key == "top_n") {
        cfg.top_n = v.get<std::size_t>();
      } else if (key == "threshold") {
        cfg.threshold = io::parse_threshold_rule(v.get<std::string>());
      } else if (key == "serial") {
        cfg.exec = v.get<bool>() ? kernels::Exec::serial : kernels::Exec::openmp;
      } else if (key == "out") {
        cfg.out_dir = v.get<std::string>();
      } else {
        throw UsageError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config file: ") + e.what());
  }
}

json to_json(const RunConfig& cfg) {
  return {{"personas", cfg.personas},
          {"start", format_date(cfg.start)},
          {"days", cfg.days},
          {"seed", cfg.seed},
          {"k", cfg.k ? json(*cfg.k) : json("auto")},
          {"k_max", cfg.k_max},
          {"restarts", cfg.restarts},
          {"min_completeness", cfg.min_completeness},
          {"top_n", cfg.top_n},
          {"threshold", io::threshold_rule_name(cfg.threshold)},
          {"serial", cfg.exec == kernels::Exec::serial},
          {"out", cfg.out_dir.string()}};
}

analytics::ProfileSet meter_profiles(const store::TelemetryStore& store, const std::string& meter_id,
                                     double min_completeness) {
  return analytics::build_daily_profiles(power_series(store, meter_id, std::nullopt, std::nullopt), min_completeness);
}

Analysis analyze_meter(const store::TelemetryStore& store, const std::string& meter_id, const RunConfig& cfg) {
  Analysis a;
  a.meter_id = meter_id;
  a.profiles = meter_profiles(store, meter_id, cfg.min_completeness);
  const std::size_t n = a.profiles.profiles.size();

  if (n >= std::size_t(cfg.k_max)) {
    a.selection = analytics::select_k(a.profiles.profiles, cfg.seed, cfg.restarts, cfg.exec, cfg.k_max);
  } else if (!cfg.k) {
    throw InsufficientData("insufficient data: k selection needs " + std::to_string(cfg.k_max) +
                           " complete days for meter " + meter_id + ", found " + std::to_string(n));
  }
  const int k = cfg.k ? *cfg.k : a.selection->recommended_k;
  if (n < std::size_t(k)) {
    throw InsufficientData("insufficient data: k = " + std::to_string(k) + " needs at least " + std::to_string(k) +
                           " complete days for meter " + meter_id + ", found " + std::to_string(n));
  }

  analytics::KMeansOptions opt;
  opt.k = k;
  opt.seed = cfg.seed;
  opt.restarts = cfg.restarts;
  opt.exec = cfg.exec;
  a.model = analytics::kmeans_fit(a.profiles.profiles, opt);
  a.anomalies = analytics::anomaly_scores(a.model, a.profiles.profiles, cfg.threshold);
  return a;
}

json anomaly_json(const Analysis& a, const RunConfig& cfg) {
  json j = io::anomalies_to_json(a.meter_id, a.anomalies, a.model.k, cfg.top_n);
  j["seed"] = cfg.seed;
  j["restarts"] = cfg.restarts;
  j["min_completeness"] = cfg.min_completeness;
  j["excluded"] = io::excluded_to_json(a.profiles.excluded);
  return j;
}

std::vector<store::PowerSample> power_series(const store::TelemetryStore& store, const std::string& meter_id,
                                             std::optional<Instant> from, std::optional<Instant> to) {
  const auto extent = store.extent(meter_id);
  if (!extent) throw UnknownMeter("unknown meter '" + meter_id + "'");
  return store.mean_power_series(meter_id, protocol::obis::kPositiveActive,
                                 {from.value_or(extent->first), to.value_or(extent->second)});
}

std::vector<sim::AnomalyScript> casestudy_scripts(const std::string& persona, Date start, int n_days) {
  std::vector<sim::AnomalyScript> out;
  const sys_days first{start};
  const sys_days last = first + days{n_days - 1};
  auto add = [&](sim::AnomalyKind kind, Date d) {
    if (sys_days{d} >= first && sys_days{d} <= last) out.push_back({kind, d, {}});
  };
  using std::chrono::July;
  using std::chrono::June;
  using std::chrono::year;
  if (persona == "S1") {
    add(sim::AnomalyKind::evening_baking, year{2023} / June / 24);
    add(sim::AnomalyKind::shifted_morning, year{2023} / July / 9);
    add(sim::AnomalyKind::absence_morning, year{2023} / July / 20);
  } else if (persona == "S2") {
    // away for a couple of days
    add(sim::AnomalyKind::full_absence, offset(start, n_days / 2));
    add(sim::AnomalyKind::full_absence, offset(start, n_days / 2 + 1));
  }
  return out;
}

sim::AnomalyScript parse_script_spec(std::string_view spec) {
  const auto at = spec.find('@');
  if (at == std::string_view::npos) throw UsageError("anomaly script '" + std::string(spec) + "' needs kind@date");
  sim::AnomalyScript s;
  try {
    s.kind = sim::parse_anomaly(spec.substr(0, at));
    std::string_view rest = spec.substr(at + 1);
    const auto colon = rest.find(':');
    s.day = parse_date(rest.substr(0, colon));
    if (colon != std::string_view::npos) {
      std::string_view params = rest.substr(colon + 1);
      while (!params.empty()) {
        const auto comma = params.find(',');
        const std::string_view kv = params.substr(0, comma);
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) throw UsageError("parameter '" + std::string(kv) + "' needs name=value");
        s.parameters[std::string(kv.substr(0, eq))] = std::stod(std::string(kv.substr(eq + 1)));
        params = comma == std::string_view::npos ? std::string_view{} : params.substr(comma + 1);
      }
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError("anomaly script '" + std::string(spec) + "': " + e.what());
  }
  return s;
}

}  // namespace meterwatch::pipeline
