// End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
// and exits non-zero if any criterion fails.

#include <httplib.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "meterwatch/io.hpp"
#include "meterwatch/protocol.hpp"
#include "meterwatch/rng.hpp"
#include "meterwatch/service.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace meterwatch;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs >= limit_s) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(int(limit_s)) + " s limit";
  }
  if (!o.pass) ++failures;
  std::printf("%s [%d] %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), secs, o.detail.c_str());
  std::fflush(stdout);
}

std::string counts(const std::string& label, int got, int of) {
  return label + " " + std::to_string(got) + "/" + std::to_string(of);
}

// ---- protocol -------------------------------------------------------------

std::string random_value(Rng& rng) {
  static const std::string alphabet = [] {
    std::string s;
    for (char c = 0x20; c < 0x7F; ++c) {
      if (c != '(' && c != ')' && c != '*') s += c;
    }
    return s;
  }();
  std::string v;
  const auto len = rng.below(17);
  for (std::uint64_t i = 0; i < len; ++i) v += alphabet[rng.below(alphabet.size())];
  return v;
}

std::vector<protocol::DataLine> random_lines(Rng& rng) {
  std::vector<protocol::DataLine> lines(rng.below(9));
  for (auto& l : lines) {
    l.address = {std::uint8_t(rng.below(100)), std::uint8_t(rng.below(100)), std::uint8_t(rng.below(100))};
    l.value = random_value(rng);
    l.unit = protocol::Unit(rng.below(3));
  }
  return lines;
}

Outcome protocol_criterion() {
  Rng rng(2024);
  int round_trip_failures = 0;
  for (int i = 0; i < 10'000; ++i) {
    const auto lines = random_lines(rng);
    const auto frame = protocol::parse_readout(protocol::encode_readout(lines));
    if (frame.lines != lines) ++round_trip_failures;
  }

  // arbitrary bytes, half of them mutations of valid frames
  int crashes = 0;
  for (int i = 0; i < 10'000; ++i) {
    protocol::Bytes input;
    if (i % 2 == 0) {
      input.resize(rng.below(300));
      for (auto& b : input) b = std::uint8_t(rng.below(256));
    } else {
      input = protocol::encode_readout(random_lines(rng));
      for (auto m = rng.below(4) + 1; m > 0 && !input.empty(); --m) {
        switch (rng.below(3)) {
          case 0: input[rng.below(input.size())] = std::uint8_t(rng.below(256)); break;
          case 1: input.erase(input.begin() + std::ptrdiff_t(rng.below(input.size()))); break;
          default: input.insert(input.begin() + std::ptrdiff_t(rng.below(input.size() + 1)), std::uint8_t(rng.below(256)));
        }
      }
    }
    for (auto parse : {+[](protocol::ByteView b) { (void)protocol::parse_readout(b); },
                       +[](protocol::ByteView b) { (void)protocol::parse_identification(b); }}) {
      try {
        parse(input);
      } catch (const protocol::ProtocolError&) {
      } catch (...) {
        ++crashes;
      }
    }
  }

  // every byte between STX and ETX, every non-zero XOR mask
  long corruptions = 0, other_outcome = 0;
  for (int i = 0; i < 1000; ++i) {
    auto lines = random_lines(rng);
    if (lines.empty()) lines.push_back({protocol::obis::kPositiveActive, "000123.456", protocol::Unit::kWh});
    const auto frame = protocol::encode_readout(lines);
    const std::size_t etx = frame.size() - 2;
    auto bad = frame;
    for (std::size_t pos = 1; pos < etx; ++pos, bad[pos - 1] = frame[pos - 1]) {
      for (int mask = 1; mask < 256; ++mask) {
        bad[pos] = frame[pos] ^ std::uint8_t(mask);
        ++corruptions;
        const auto result = protocol::try_parse_readout(bad);
        const auto* error = std::get_if<protocol::ProtocolError>(&result);
        if (!error || error->kind() != protocol::ErrorKind::ChecksumMismatch) ++other_outcome;
      }
    }
  }
  std::ostringstream d;
  d << "round-trip failures " << round_trip_failures << "/10000, parser crashes " << crashes
    << "/20000 calls, corruptions without ChecksumMismatch " << other_outcome << "/" << corruptions;
  return {round_trip_failures == 0 && crashes == 0 && other_outcome == 0, d.str()};
}

// ---- simulator and store --------------------------------------------------

Outcome conservation_criterion() {
  std::ostringstream d;
  bool pass = true;
  for (auto id : {"S1", "S2", "S3", "S4"}) {
    const auto sim = sim::simulate_period(sim::build_persona(id), support::kStart, 30, {}, 1);
    store::TelemetryStore st;
    st.ingest(sim.readings);
    const auto ext = st.extent(id);
    const auto power = st.mean_power_series(id, protocol::obis::kPositiveActive, {ext->first, ext->second});
    double worst = 0, sim_total = 0, store_total = 0;
    std::size_t missing = 0;
    for (std::size_t i = 0; i < sim.slot_power_w.size(); ++i) {
      const double expected = sim.slot_power_w[i] * 0.25 / 1000;
      sim_total += expected;
      if (i >= power.size() || !power[i].mean_power_w) {
        ++missing;
        continue;
      }
      const double got = *power[i].mean_power_w * 0.25 / 1000;
      store_total += got;
      worst = std::max(worst, std::abs(got - expected));
    }
    const double register_total =
        double(oracle::wrapped_delta_milli(sim.readings.front().value_kwh.rescaled(3).units(),
                                           sim.readings.back().value_kwh.rescaled(3).units())) / 1000;
    const bool ok = missing == 0 && power.size() == sim.slot_power_w.size() && worst <= 0.001 + 1e-9 &&
                    std::abs(store_total - register_total) < 1e-6;
    pass = pass && ok;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s max slot error %.4f kWh, total %.3f kWh (register %.3f); ", id, worst,
                  sim_total, register_total);
    d << buf;
  }
  return {pass, d.str()};
}

// ---- analytics ------------------------------------------------------------

analytics::KMeansOptions k_opts(int k, std::uint64_t seed) {
  analytics::KMeansOptions o;
  o.k = k;
  o.seed = seed;
  return o;
}

Outcome cluster_recovery_criterion() {
  int ari_ok = 0, k_ok = 0;
  double worst_ari = 1;
  std::map<int, int> recommended;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto run = support::simulate_profiles("S4", seed);
    const auto& ps = run.profiles.profiles;
    const auto model = analytics::kmeans_fit(ps, k_opts(3, seed));
    std::vector<int> got;
    std::vector<std::string> truth;
    for (const auto& p : ps) {
      got.push_back(model.assignments.at(p.day));
      truth.push_back(run.sim.truth_labels.at(p.day));
    }
    const double ari = oracle::adjusted_rand_index(got, truth);
    worst_ari = std::min(worst_ari, ari);
    if (ari >= 0.9) ++ari_ok;
    const int k = analytics::select_k(ps, seed, 10).recommended_k;
    ++recommended[k];
    if (k == 3) ++k_ok;
  }
  std::ostringstream d;
  d << counts("ARI >= 0.9 in", ari_ok, 20) << " (worst " << worst_ari << "), " << counts("select_k = 3 in", k_ok, 20);
  return {ari_ok >= 18 && k_ok >= 18, d.str()};
}

Outcome degenerate_criterion() {
  int ok = 0;
  std::map<int, int> hist;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto run = support::simulate_profiles("S3", seed);
    const int k = analytics::select_k(run.profiles.profiles, seed, 10).recommended_k;
    ++hist[k];
    if (k <= 2) ++ok;
  }
  std::ostringstream d;
  d << counts("recommended k <= 2 in", ok, 20) << " (k histogram:";
  for (auto [k, n] : hist) d << " " << k << "x" << n;
  d << ")";
  return {ok >= 18, d.str()};
}

Outcome anomaly_criterion() {
  const auto scripts = pipeline::casestudy_scripts("S1", support::kStart, 30);
  std::vector<int> in_top(scripts.size()), flagged(scripts.size()), flagged_sd(scripts.size());
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto run = support::simulate_profiles("S1", seed, scripts);
    const auto& ps = run.profiles.profiles;
    const auto model = analytics::kmeans_fit(ps, k_opts(3, seed));
    const auto report = analytics::anomaly_scores(model, ps);
    const auto sd = analytics::anomaly_scores(model, ps, analytics::ThresholdRule::mean_sd);
    const auto top = analytics::top_days(report, 3);
    for (std::size_t i = 0; i < scripts.size(); ++i) {
      const auto has = [&](const std::vector<Date>& v) { return std::find(v.begin(), v.end(), scripts[i].day) != v.end(); };
      in_top[i] += has(top);
      flagged[i] += has(report.flagged);
      flagged_sd[i] += has(sd.flagged);
    }
  }
  bool pass = true;
  std::ostringstream d;
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    pass = pass && in_top[i] >= 19 && flagged[i] >= 17;
    d << sim::anomaly_name(scripts[i].kind) << ": " << counts("top-3", in_top[i], 20) << ", "
      << counts("flagged", flagged[i], 20) << " (mean+3sd rule " << flagged_sd[i] << "/20); ";
  }
  return {pass, d.str()};
}

Outcome kmeans_oracle_criterion() {
  Rng rng(77);
  int mismatches = 0, non_monotone = 0, iterations = 0;
  double worst = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t n = 1 + rng.below(8);
    const int k = 1 + int(rng.below(std::min<std::uint64_t>(3, n)));
    const std::size_t dim = std::array<std::size_t, 3>{1, 2, 96}[rng.below(3)];
    // a few loose groups, so poor local optima exist
    std::vector<std::vector<double>> centres(1 + rng.below(4), std::vector<double>(dim));
    for (auto& c : centres)
      for (auto& v : c) v = rng.uniform(0, 2000);
    std::vector<std::vector<double>> pts;
    std::vector<double> flat;
    for (std::size_t i = 0; i < n; ++i) {
      auto p = centres[rng.below(centres.size())];
      for (auto& v : p) v += rng.uniform(-300, 300);
      pts.push_back(p);
      flat.insert(flat.end(), p.begin(), p.end());
    }
    analytics::KMeansOptions o = k_opts(k, std::uint64_t(inst));
    o.restarts = 50;
    const auto r = analytics::kmeans_points(flat, n, dim, o);
    const double best = oracle::brute_force_inertia(pts, k);
    const double rel = std::abs(r.inertia - best) / std::max(best, 1e-300);
    if (!(std::abs(r.inertia - best) <= 1e-9 * best || (best == 0 && r.inertia <= 1e-9))) ++mismatches;
    if (best > 0) worst = std::max(worst, rel);
    for (const auto& trace : r.restart_traces) {
      for (std::size_t i = 1; i < trace.size(); ++i) {
        ++iterations;
        if (trace[i] > trace[i - 1] * (1 + 1e-12)) ++non_monotone;
      }
    }
  }
  std::ostringstream d;
  d << "brute-force mismatches " << mismatches << "/200 (worst relative gap " << worst << "), non-monotone steps "
    << non_monotone << "/" << iterations;
  return {mismatches == 0 && non_monotone == 0, d.str()};
}

// ---- properties -----------------------------------------------------------

std::vector<MeterReading> random_readings(Rng& rng) {
  std::vector<MeterReading> out;
  const int meters = 1 + int(rng.below(3));
  for (int m = 0; m < meters; ++m) {
    std::int64_t milli = std::int64_t(rng.below(1'000'000'000));
    Instant t = warsaw_midnight(support::kStart) + int(rng.below(96)) * kSlot;
    for (auto n = 1 + rng.below(40); n > 0; --n) {
      out.push_back({"m" + std::to_string(m), t, protocol::obis::kPositiveActive, Decimal::from_units(milli, 3)});
      t += kSlot * int(1 + (rng.bernoulli(0.1) ? rng.below(6) : 0));
      milli = (milli + std::int64_t(rng.below(800))) % 1'000'000'000;
    }
  }
  return out;
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<analytics::DailyProfile> random_profiles(Rng& rng) {
  std::vector<std::vector<double>> shapes(1 + rng.below(3), std::vector<double>(96));
  for (auto& s : shapes)
    for (auto& v : s) v = rng.uniform(50, 3000);
  std::vector<std::vector<double>> rows(4 + rng.below(10));
  for (auto& r : rows) {
    r = shapes[rng.below(shapes.size())];
    for (auto& v : r) v = std::max(0.0, v + 200 * rng.normal());
  }
  return support::profiles_from(rows);
}

bool same_series(const store::TelemetryStore& a, const store::TelemetryStore& b) {
  for (const auto& m : a.meters()) {
    const auto ext = a.extent(m);
    const auto pa = a.mean_power_series(m, protocol::obis::kPositiveActive, {ext->first, ext->second});
    const auto pb = b.mean_power_series(m, protocol::obis::kPositiveActive, {ext->first, ext->second});
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (pa[i].mean_power_w != pb[i].mean_power_w || pa[i].quality != pb[i].quality) return false;
    }
  }
  return true;
}

Outcome invariant_criterion() {
  Rng rng(4242);
  int idempotent = 0, order = 0, scale = 0, permutation = 0;
  constexpr int kCases = 1000;
  for (int c = 0; c < kCases; ++c) {
    const auto batch = random_readings(rng);

    store::TelemetryStore once, twice;
    once.ingest(batch);
    twice.ingest(batch);
    const auto again = twice.ingest(batch);
    idempotent += once.same_contents(twice) && again.readings_accepted == 0 && again.duplicates_dropped == batch.size();

    auto shuffled = batch;
    shuffle(shuffled, rng);
    store::TelemetryStore split;
    for (std::size_t i = 0; i < shuffled.size();) {
      const std::size_t len = 1 + rng.below(shuffled.size() - i);
      split.ingest(std::span(shuffled).subspan(i, len));
      i += len;
    }
    order += split.same_contents(once) && same_series(split, once);

    const auto ps = random_profiles(rng);
    const int k = 1 + int(rng.below(std::min<std::uint64_t>(3, ps.size())));
    analytics::KMeansOptions o = k_opts(k, std::uint64_t(c));
    o.restarts = 3;
    const auto model = analytics::kmeans_fit(ps, o);
    const auto report = analytics::anomaly_scores(model, ps);
    bool scaled_ok = true;
    for (double factor : {0.5, 3.0}) {
      auto scaled = ps;
      for (auto& p : scaled)
        for (auto& v : p.values) v *= factor;
      const auto m2 = analytics::kmeans_fit(scaled, o);
      const auto r2 = analytics::anomaly_scores(m2, scaled);
      scaled_ok = scaled_ok && m2.assignments == model.assignments &&
                  std::abs(m2.inertia - factor * factor * model.inertia) <= 1e-9 * factor * factor * model.inertia + 1e-9 &&
                  r2.ranked_days == report.ranked_days && r2.flagged == report.flagged;
      for (const auto& [day, s] : report.scores) {
        scaled_ok = scaled_ok && std::abs(r2.scores.at(day) - factor * s) <= 1e-9 * factor * s + 1e-9;
      }
    }
    scale += scaled_ok;

    auto permuted = ps;
    shuffle(permuted, rng);
    const auto r3 = analytics::anomaly_scores(model, permuted);
    permutation += r3.scores == report.scores && r3.ranked_days == report.ranked_days &&
                   r3.flagged == report.flagged && r3.threshold == report.threshold && r3.nearest == report.nearest;
  }
  std::ostringstream d;
  d << counts("idempotent", idempotent, kCases) << ", " << counts("order independent", order, kCases) << ", "
    << counts("scale equivariant", scale, kCases) << ", " << counts("permutation independent", permutation, kCases);
  return {idempotent == kCases && order == kCases && scale == kCases && permutation == kCases, d.str()};
}

// ---- command line against the service ----------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + METERWATCH_CLI + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome equivalence_criterion() {
  const auto dir = fs::temp_directory_path() / "meterwatch_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  store::TelemetryStore st;
  service::Server server(st, {});
  const int port = server.bind("127.0.0.1", 0);
  std::thread thread([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);

  struct Case {
    std::string persona;
    std::string cli_flags;
    std::string query;
  };
  const std::vector<Case> cases{{"S1", "--k 3", "?k=3"},          {"S2", "", ""},
                                {"S3", "", ""},                     {"S4", "", ""},
                                {"S4", "--k 2 --seed 9", "?k=2&seed=9"}, {"S1", "--threshold mean-sd", "?threshold=mean-sd"}};
  int equal = 0;
  std::string detail;
  for (const auto& p : {"S1", "S2", "S3", "S4"}) {
    if (run_cli("simulate --persona " + std::string(p) + " --out '" + dir.string() + "'") != 0) {
      detail += std::string("simulate ") + p + " failed; ";
      continue;
    }
    std::ifstream csv(dir / ("readings_" + std::string(p) + ".csv"));
    std::string ndjson;
    for (const auto& r : io::read_any_csv(csv)) ndjson += io::reading_to_json(r).dump() + "\n";
    const auto res = client.Post("/v1/readings", ndjson, "application/x-ndjson");
    if (!res || res->status != 200) detail += std::string("POST ") + p + " failed; ";
  }
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const auto out = dir / ("out" + std::to_string(i));
    const auto csv = dir / ("readings_" + c.persona + ".csv");
    const int rc = run_cli("analyze " + c.cli_flags + " --out '" + out.string() + "' '" + csv.string() + "'");
    const auto res = client.Get("/v1/meters/" + c.persona + "/anomalies" + c.query);
    const std::string from_cli = rc == 0 ? slurp(out / ("anomalies_" + c.persona + ".json")) : "";
    const bool same = rc == 0 && res && res->status == 200 && !from_cli.empty() &&
                      io::canonical(nlohmann::json::parse(from_cli)) == io::canonical(nlohmann::json::parse(res->body));
    if (same) {
      ++equal;
    } else {
      detail += c.persona + " " + c.query + " differs; ";
    }
  }
  server.stop();
  thread.join();
  fs::remove_all(dir);
  return {equal == int(cases.size()), detail + counts("identical reports", equal, int(cases.size()))};
}

}  // namespace

int main() {
  criterion(1, "protocol round-trip, fuzz and corruption", 30, protocol_criterion);
  criterion(2, "energy conservation through ingest and mean power", 10, conservation_criterion);
  criterion(3, "S4 cluster recovery", 60, cluster_recovery_criterion);
  criterion(4, "S3 degenerate k", 0, degenerate_criterion);
  criterion(5, "S1 anomaly recovery", 0, anomaly_criterion);
  criterion(6, "k-means against exhaustive partitions", 0, kmeans_oracle_criterion);
  criterion(7, "ingest and scoring invariants", 0, invariant_criterion);
  criterion(8, "command line and service reports agree", 0, equivalence_criterion);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
