#include <doctest.h>

#include <memory>
#include <regex>

#include "meterwatch/charts.hpp"
#include "meterwatch/io.hpp"
#include "support.hpp"

using namespace meterwatch;
using namespace meterwatch::pipeline;
using namespace std::chrono;

namespace {

std::unique_ptr<store::TelemetryStore> store_with(const std::string& persona, int days, std::uint64_t seed = 1) {
  auto s = std::make_unique<store::TelemetryStore>();
  s->ingest(sim::simulate_period(sim::build_persona(persona), support::kStart, days, {}, seed).readings);
  return s;
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

// Every opened element is closed again and the document is one <svg>.
bool balanced_svg(const std::string& svg) {
  static const std::regex tag(R"(<(/?)([a-z]+)[^>]*?(/?)>)");
  std::vector<std::string> stack;
  for (std::sregex_iterator it(svg.begin(), svg.end(), tag), end; it != end; ++it) {
    const auto& m = *it;
    if (m[3].length()) continue;
    if (m[1].length() == 0) {
      stack.push_back(m[2]);
    } else {
      if (stack.empty() || stack.back() != m[2]) return false;
      stack.pop_back();
    }
  }
  return stack.empty() && svg.find("<svg") != std::string::npos;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("run config validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.personas = {"S7"};
  try {
    c.validate();
    FAIL("no error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("valid ids: S1, S2, S3, S4") != std::string::npos);
  }
  auto bad = [](auto mutate) {
    RunConfig r;
    mutate(r);
    return r;
  };
  CHECK_THROWS_AS(bad([](RunConfig& r) { r.days = 0; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](RunConfig& r) { r.k_max = 7; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](RunConfig& r) { r.k = 0; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](RunConfig& r) { r.k_max = 3, r.k = 4; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](RunConfig& r) { r.restarts = 0; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](RunConfig& r) { r.min_completeness = 1.5; }).validate(), UsageError);
  CHECK_THROWS_AS(bad([](RunConfig& r) { r.top_n = 0; }).validate(), UsageError);
}

TEST_CASE("json config overlays and round trips") {
  RunConfig c;
  apply_json(c, nlohmann::json::parse(R"({"k": 3, "seed": 9, "threshold": "mean-sd", "personas": ["S4"]})"));
  CHECK(c.k == 3);
  CHECK(c.seed == 9);
  CHECK(c.threshold == analytics::ThresholdRule::mean_sd);
  CHECK(c.personas == std::vector<std::string>{"S4"});
  CHECK(c.days == 30);

  RunConfig back;
  apply_json(back, to_json(c));
  CHECK(to_json(back) == to_json(c));

  apply_json(c, nlohmann::json::parse(R"({"k": "auto"})"));
  CHECK_FALSE(c.k);
  CHECK_THROWS_AS(apply_json(c, nlohmann::json::parse(R"({"kk": 3})")), UsageError);
  CHECK_THROWS_AS(apply_json(c, nlohmann::json::parse(R"({"days": "many"})")), UsageError);
  CHECK_THROWS_AS(apply_json(c, nlohmann::json::parse("[1]")), UsageError);
}

TEST_CASE("script specs") {
  const auto s = parse_script_spec("shifted-morning@2023-07-09:shift_minutes=90");
  CHECK(s.kind == sim::AnomalyKind::shifted_morning);
  CHECK(s.day == 2023y / July / 9);
  CHECK(s.parameters.at("shift_minutes") == 90.0);
  CHECK(parse_script_spec("full-absence@2023-06-30").parameters.empty());
  CHECK_THROWS_AS(parse_script_spec("full-absence"), UsageError);
  CHECK_THROWS_AS(parse_script_spec("nap@2023-06-30"), UsageError);
  CHECK_THROWS_AS(parse_script_spec("full-absence@2023-13-30"), UsageError);
  CHECK_THROWS_AS(parse_script_spec("full-absence@2023-06-30:x"), UsageError);
}

TEST_CASE("case study scripts stay inside the period") {
  const auto s1 = casestudy_scripts("S1", support::kStart, 30);
  REQUIRE(s1.size() == 3);
  CHECK(s1[0].day == 2023y / June / 24);
  CHECK(s1[1].day == 2023y / July / 9);
  CHECK(s1[2].day == 2023y / July / 20);
  CHECK(casestudy_scripts("S1", support::kStart, 10).size() == 1);
  const auto s2 = casestudy_scripts("S2", support::kStart, 30);
  REQUIRE(s2.size() == 2);
  CHECK(s2[0].day == 2023y / July / 6);
  CHECK(casestudy_scripts("S3", support::kStart, 30).empty());
}

TEST_CASE("analysis errors") {
  const auto sp = store_with("S4", 4);
  const auto& s = *sp;
  RunConfig c;
  CHECK_THROWS_AS(analyze_meter(s, "nobody", c), UnknownMeter);
  CHECK_THROWS_AS(analyze_meter(s, "S4", c), InsufficientData);  // auto k needs k_max days
  c.k = 5;
  CHECK_THROWS_AS(analyze_meter(s, "S4", c), InsufficientData);
  c.k = 2;
  const auto a = analyze_meter(s, "S4", c);
  CHECK(a.model.k == 2);
  CHECK_FALSE(a.selection);
  CHECK(a.profiles.profiles.size() == 4);
  CHECK_THROWS_AS(power_series(s, "nobody", {}, {}), UnknownMeter);
}

TEST_CASE("analysis follows the recommendation and is executor independent") {
  const auto sp = store_with("S4", 30, 3);
  const auto& s = *sp;
  RunConfig c;
  const auto a = analyze_meter(s, "S4", c);
  REQUIRE(a.selection);
  CHECK(a.model.k == a.selection->recommended_k);
  c.exec = kernels::Exec::serial;
  const auto b = analyze_meter(s, "S4", c);
  CHECK(io::canonical(anomaly_json(a, c)) == io::canonical(anomaly_json(b, c)));

  const auto j = anomaly_json(a, c);
  CHECK(j["seed"] == c.seed);
  CHECK(j["restarts"] == c.restarts);
  CHECK(j["ranked"].size() == 30);
  CHECK(j["top"].size() == 3);
}

TEST_CASE("power series covers the meter extent by default") {
  const auto sp = store_with("S3", 2);
  const auto& s = *sp;
  const auto p = power_series(s, "S3", {}, {});
  CHECK(p.size() == 2 * 96);
  const auto q = power_series(s, "S3", p[10].slot_start, p[19].slot_start + kSlot);
  REQUIRE(q.size() == 10);
  CHECK(q.front().slot_start == p[10].slot_start);
  CHECK(*q.back().mean_power_w == *p[19].mean_power_w);
}

TEST_CASE("charts draw one polyline per profile") {
  const auto sp = store_with("S4", 12);
  const auto& s = *sp;
  RunConfig c;
  c.k = 3;
  const auto a = analyze_meter(s, "S4", c);

  const auto clusters = charts::cluster_chart(a);
  CHECK(balanced_svg(clusters));
  CHECK(count(clusters, "<polyline class=\"day\"") == 12);
  CHECK(count(clusters, "<polyline class=\"mean\"") == 3);

  const auto anomalies = charts::anomaly_chart(a, 2);
  CHECK(balanced_svg(anomalies));
  CHECK(count(anomalies, "<polyline class=\"anomaly\"") == 2);
  CHECK(count(anomalies, "<polyline class=\"mean\"") == 2);
  CHECK(anomalies.find("#d62728") != std::string::npos);

  const std::vector<Analysis> both{a, a};
  const auto centroids = charts::centroid_chart(both);
  CHECK(balanced_svg(centroids));
  CHECK(count(centroids, "<polyline class=\"mean\"") == 6);
}

}  // TEST_SUITE
