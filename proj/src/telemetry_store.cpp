#include "meterwatch/telemetry_store.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include <json.hpp>

namespace meterwatch::store {
namespace {

const Decimal kModulus = Decimal::from_units(kRegisterModulusKwh, 0);
const Decimal kHigh = Decimal::from_units(kRegisterModulusKwh * 9, 1);  // 0.9 x modulus
const Decimal kLow = Decimal::from_units(kRegisterModulusKwh, 1);       // 0.1 x modulus

std::string describe(const MeterReading& r) {
  return r.meter_id + " " + r.register_code.to_string() + " @ " + format_rfc3339(r.timestamp);
}

// Adjacent decreasing pairs that are valid wraps; throws on an invalid decrease.
std::uint64_t check_series(const std::string& meter_id, const Series& s) {
  std::uint64_t rollovers = 0;
  const Decimal* prev = nullptr;
  Instant prev_t{};
  for (const auto& [t, v] : s) {
    if (prev != nullptr && v < *prev) {
      if (!is_rollover(*prev, v)) {
        throw StoreError(StoreErrorKind::NonMonotonicRegister,
                         "register of " + meter_id + " decreases from " + prev->to_string() + " at " +
                             format_rfc3339(prev_t) + " to " + v.to_string() + " at " + format_rfc3339(t));
      }
      ++rollovers;
    }
    prev = &v;
    prev_t = t;
  }
  return rollovers;
}

Instant ceil_to_slot(Instant t) {
  const Instant f = floor_to_slot(t);
  return f == t ? f : f + kSlot;
}

double delta_kwh(const Decimal& a, const Decimal& b) {
  return register_delta(a, b).to_double();
}

double wrap_kwh(double v) {
  const double m = double(kRegisterModulusKwh);
  v = std::fmod(v, m);
  return v < 0 ? v + m : v;
}

}  // namespace

std::string_view quality_name(Quality q) {
  switch (q) {
    case Quality::measured: return "measured";
    case Quality::interpolated: return "interpolated";
    case Quality::missing: return "missing";
  }
  return "";
}

bool is_rollover(const Decimal& before, const Decimal& after) {
  return after < before && before > kHigh && after < kLow;
}

Decimal register_delta(const Decimal& before, const Decimal& after) {
  if (after < before && is_rollover(before, after)) return after + kModulus - before;
  return after - before;
}

std::vector<GridReading> align_series(const Series& series, Span span) {
  std::vector<GridReading> grid;
  for (Instant b = ceil_to_slot(span.from); b <= span.to; b += kSlot) {
    GridReading g{b, 0.0, std::nullopt, Quality::missing};
    // closest reading within the snap tolerance, earlier one on a tie
    auto lo = series.lower_bound(b - kSnapTolerance);
    const Series::value_type* best = nullptr;
    for (auto it = lo; it != series.end() && it->first <= b + kSnapTolerance; ++it) {
      if (best == nullptr || abs(it->first - b) < abs(best->first - b)) best = &*it;
    }
    if (best != nullptr) {
      g.exact = best->second;
      g.value_kwh = best->second.to_double();
      g.quality = Quality::measured;
    } else {
      auto next = series.lower_bound(b);
      if (next != series.end() && next != series.begin()) {
        auto prev = std::prev(next);
        const auto gap = next->first - prev->first;
        if (gap <= kMaxInterpolationGap) {
          const double frac = std::chrono::duration<double>(b - prev->first) / std::chrono::duration<double>(gap);
          g.value_kwh = wrap_kwh(prev->second.to_double() + frac * delta_kwh(prev->second, next->second));
          g.quality = Quality::interpolated;
        }
      }
    }
    grid.push_back(std::move(g));
  }
  return grid;
}

std::vector<PowerSample> power_from_grid(const std::string& meter_id, std::span<const GridReading> grid) {
  std::vector<PowerSample> out;
  if (grid.size() < 2) return out;
  out.reserve(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const GridReading& a = grid[i];
    const GridReading& b = grid[i + 1];
    PowerSample s{meter_id, a.boundary, std::nullopt, Quality::missing};
    if (a.quality != Quality::missing && b.quality != Quality::missing) {
      if (a.exact && b.exact) {
        const Decimal d = register_delta(*a.exact, *b.exact);
        // units * 4000 / 10^scale keeps whole-watt results exact
        double scale = 1.0;
        for (int k = 0; k < d.scale(); ++k) scale *= 10.0;
        s.mean_power_w = double(d.units()) * 4000.0 / scale;
      } else {
        double d = b.value_kwh - a.value_kwh;
        if (d < 0 && a.value_kwh > 0.9 * double(kRegisterModulusKwh) && b.value_kwh < 0.1 * double(kRegisterModulusKwh)) {
          d += double(kRegisterModulusKwh);
        }
        s.mean_power_w = std::max(0.0, d) * 4000.0;
      }
      s.quality = (a.quality == Quality::measured && b.quality == Quality::measured) ? Quality::measured
                                                                                      : Quality::interpolated;
    }
    out.push_back(std::move(s));
  }
  return out;
}

TelemetryStore::TelemetryStore(std::filesystem::path log_path) : log_path_(std::move(log_path)) {
  if (std::ifstream in{*log_path_}) {
    std::vector<MeterReading> replay;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        replay.push_back({j.at("meter_id").get<std::string>(), parse_rfc3339(j.at("timestamp").get<std::string>()),
                          protocol::ObisCode::parse(j.at("obis").get<std::string>()),
                          Decimal::parse(j.at("value_kwh").get<std::string>())});
      } catch (const std::exception& e) {
        throw std::runtime_error("store log " + log_path_->string() + " line " + std::to_string(lineno) + ": " +
                                 e.what());
      }
    }
    ingest_locked(replay, false);
  }
  if (log_path_->has_parent_path()) std::filesystem::create_directories(log_path_->parent_path());
  log_.open(*log_path_, std::ios::app);
  if (!log_) throw std::runtime_error("cannot open store log " + log_path_->string());
}

StoreStats TelemetryStore::ingest(std::span<const MeterReading> batch) {
  std::unique_lock lock(mutex_);
  return ingest_locked(batch, true);
}

StoreStats TelemetryStore::ingest_locked(std::span<const MeterReading> batch, bool log) {
  StoreStats delta;
  std::map<Key, Series> staged;
  std::vector<const MeterReading*> accepted;
  for (const MeterReading& r : batch) {
    if (r.value_kwh.negative()) {
      throw StoreError(StoreErrorKind::InvalidReading, "negative register value for " + describe(r));
    }
    if (r.meter_id.empty()) throw StoreError(StoreErrorKind::InvalidReading, "empty meter id");
    const Key key{r.meter_id, r.register_code};
    auto it = staged.find(key);
    if (it == staged.end()) {
      auto existing = series_.find(key);
      it = staged.emplace(key, existing == series_.end() ? Series{} : existing->second).first;
    }
    Series& s = it->second;
    if (auto hit = s.find(r.timestamp); hit != s.end()) {
      if (hit->second != r.value_kwh) {
        throw StoreError(StoreErrorKind::ConflictingDuplicate, "conflicting values " + hit->second.to_string() +
                                                                   " and " + r.value_kwh.to_string() + " for " +
                                                                   describe(r));
      }
      ++delta.duplicates_dropped;
      continue;
    }
    if (!s.empty() && r.timestamp < s.rbegin()->first) ++delta.out_of_order;
    s.emplace(r.timestamp, r.value_kwh);
    ++delta.readings_accepted;
    accepted.push_back(&r);
  }

  for (const auto& [key, s] : staged) {
    const std::uint64_t after = check_series(key.first, s);
    auto existing = series_.find(key);
    const std::uint64_t before = existing == series_.end() ? 0 : check_series(key.first, existing->second);
    delta.rollovers_detected += after > before ? after - before : 0;
  }

  for (auto& [key, s] : staged) series_[key] = std::move(s);
  stats_ += delta;

  if (log && log_.is_open()) {
    for (const MeterReading* r : accepted) {
      nlohmann::json j{{"meter_id", r->meter_id},
                       {"timestamp", format_rfc3339(r->timestamp)},
                       {"obis", r->register_code.to_string()},
                       {"value_kwh", r->value_kwh.to_string()}};
      log_ << j.dump() << '\n';
    }
    log_.flush();
  }
  return delta;
}

StoreStats TelemetryStore::stats() const {
  std::shared_lock lock(mutex_);
  return stats_;
}

std::vector<std::string> TelemetryStore::meters() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [key, s] : series_) {
    if (ids.empty() || ids.back() != key.first) ids.push_back(key.first);
  }
  return ids;
}

bool TelemetryStore::has_meter(const std::string& meter_id) const {
  std::shared_lock lock(mutex_);
  auto it = series_.lower_bound(Key{meter_id, protocol::ObisCode{}});
  return it != series_.end() && it->first.first == meter_id;
}

std::size_t TelemetryStore::size() const {
  std::shared_lock lock(mutex_);
  std::size_t n = 0;
  for (const auto& [key, s] : series_) n += s.size();
  return n;
}

std::vector<MeterReading> TelemetryStore::readings(const std::string& meter_id, protocol::ObisCode reg) const {
  std::shared_lock lock(mutex_);
  std::vector<MeterReading> out;
  if (auto it = series_.find(Key{meter_id, reg}); it != series_.end()) {
    for (const auto& [t, v] : it->second) out.push_back({meter_id, t, reg, v});
  }
  return out;
}

std::optional<std::pair<Instant, Instant>> TelemetryStore::extent(const std::string& meter_id,
                                                                  protocol::ObisCode reg) const {
  std::shared_lock lock(mutex_);
  auto it = series_.find(Key{meter_id, reg});
  if (it == series_.end() || it->second.empty()) return std::nullopt;
  return std::pair{it->second.begin()->first, it->second.rbegin()->first};
}

std::vector<GridReading> TelemetryStore::align_to_grid(const std::string& meter_id, protocol::ObisCode reg,
                                                       Span span) const {
  std::shared_lock lock(mutex_);
  auto it = series_.find(Key{meter_id, reg});
  static const Series empty;
  return align_series(it == series_.end() ? empty : it->second, span);
}

std::vector<PowerSample> TelemetryStore::mean_power_series(const std::string& meter_id, protocol::ObisCode reg,
                                                           Span span) const {
  const auto grid = align_to_grid(meter_id, reg, span);
  return power_from_grid(meter_id, grid);
}

bool TelemetryStore::same_contents(const TelemetryStore& other) const {
  if (this == &other) return true;
  std::shared_lock a(mutex_);
  std::shared_lock b(other.mutex_);
  return series_ == other.series_;
}

}  // namespace meterwatch::store
