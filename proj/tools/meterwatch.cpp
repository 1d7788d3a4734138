// meterwatch: simulate households, ingest readings, cluster daily profiles
// and rank anomalous days.
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <CLI11.hpp>
#include <pthread.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "meterwatch/charts.hpp"
#include "meterwatch/io.hpp"
#include "meterwatch/load_sim.hpp"
#include "meterwatch/pipeline.hpp"
#include "meterwatch/service.hpp"

namespace fs = std::filesystem;
using namespace meterwatch;
using nlohmann::json;
using pipeline::RunConfig;
using pipeline::UsageError;

namespace {

constexpr const char* kDataDirEnv = "METERWATCH_DATA_DIR";
constexpr const char* kStoreFile = "readings.ndjson";

fs::path data_dir() {
  const char* env = std::getenv(kDataDirEnv);
  return env && *env ? fs::path(env) : fs::path("meterwatch-data");
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out.flush()) throw std::runtime_error("cannot write " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

std::vector<MeterReading> read_csv_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return io::read_any_csv(in);
  } catch (const io::FormatError& e) {
    throw io::FormatError(path.string() + ": " + e.what());
  }
}

// Flags shared by analyze, serve and casestudy. Values are only applied
// when the flag was given, so a config file fills the rest.
struct AnalysisFlags {
  std::string k;
  int k_max = 0;
  std::uint64_t seed = 0;
  int restarts = 0;
  double min_completeness = 0;
  std::size_t top_n = 0;
  std::string threshold;
  bool serial = false;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["k"] = app->add_option("--k", k, "Cluster count, or 'auto' for the knee recommendation");
    opts["k_max"] = app->add_option("--k-max", k_max, "Largest k tried by the recommendation (1..6)");
    opts["seed"] = app->add_option("--seed", seed, "Seed for k-means++ seeding");
    opts["restarts"] = app->add_option("--restarts", restarts, "k-means restarts");
    opts["min_completeness"] = app->add_option("--min-completeness", min_completeness, "Least share of measured slots per day");
    opts["top_n"] = app->add_option("--top", top_n, "Days reported in the top ranking");
    opts["threshold"] = app->add_option("--threshold", threshold, "Anomaly threshold rule")->check(CLI::IsMember({"robust", "mean-sd"}));
    opts["serial"] = app->add_flag("--serial", serial, "Use the serial kernels");
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

  void apply(RunConfig& cfg) const {
    if (given("k")) {
      if (k == "auto") {
        cfg.k.reset();
      } else {
        try {
          std::size_t used = 0;
          cfg.k = std::stoi(k, &used);
          if (used != k.size()) throw std::invalid_argument(k);
        } catch (const std::exception&) {
          throw UsageError("--k expects 'auto' or an integer, got '" + k + "'");
        }
      }
    }
    if (given("k_max")) cfg.k_max = k_max;
    if (given("seed")) cfg.seed = seed;
    if (given("restarts")) cfg.restarts = restarts;
    if (given("min_completeness")) cfg.min_completeness = min_completeness;
    if (given("top_n")) cfg.top_n = top_n;
    if (given("threshold")) cfg.threshold = io::parse_threshold_rule(threshold);
    if (given("serial")) cfg.exec = serial ? kernels::Exec::serial : kernels::Exec::openmp;
  }
};

struct SimFlags {
  std::vector<std::string> personas;
  std::vector<std::string> persona_files;
  std::string start;
  int days = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> scripts;
  std::string out;
  bool frames = false;
  CLI::Option *o_personas, *o_start, *o_days, *o_seed, *o_out;

  void add(CLI::App* app, bool with_personas) {
    if (with_personas) {
      o_personas = app->add_option("--persona", personas, "Built-in persona ids (S1..S4)");
      app->add_option("--persona-file", persona_files, "Persona JSON documents")->check(CLI::ExistingFile);
      app->add_option("--script", scripts, "Anomaly script kind@YYYY-MM-DD[:name=value,...] (applies to every persona)");
    }
    o_start = app->add_option("--start", start, "First simulated day (YYYY-MM-DD)");
    o_days = app->add_option("--days", days, "Number of simulated days");
    o_seed = app->add_option("--seed", seed, "Simulation and clustering seed");
    o_out = app->add_option("--out", out, "Output directory");
  }

  void apply(RunConfig& cfg) const {
    if (o_personas && o_personas->count()) cfg.personas = personas;
    if (o_start->count()) {
      try {
        cfg.start = parse_date(start);
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--start: ") + e.what());
      }
    }
    if (o_days->count()) cfg.days = days;
    if (o_seed->count()) cfg.seed = seed;
    if (o_out->count()) cfg.out_dir = out;
  }
};

struct PersonaRun {
  sim::HouseholdPersona persona;
  std::vector<sim::AnomalyScript> scripts;
};

std::vector<PersonaRun> load_personas(const RunConfig& cfg, const SimFlags& f, bool personas_given) {
  std::vector<sim::AnomalyScript> extra;
  for (const auto& s : f.scripts) extra.push_back(pipeline::parse_script_spec(s));

  std::vector<PersonaRun> runs;
  if (personas_given || f.persona_files.empty()) {
    for (const auto& id : cfg.personas) runs.push_back({sim::build_persona(id), extra});
  }
  for (const auto& file : f.persona_files) {
    const json doc = read_json_file(file);
    PersonaRun run;
    try {
      run.persona = io::persona_from_json(doc);
      for (const auto& s : doc.value("scripts", json::array())) run.scripts.push_back(io::script_from_json(s));
    } catch (const std::exception& e) {
      throw UsageError(file + ": " + e.what());
    }
    run.scripts.insert(run.scripts.end(), extra.begin(), extra.end());
    runs.push_back(std::move(run));
  }
  return runs;
}

sim::SimOutput simulate_one(const PersonaRun& run, const RunConfig& cfg) {
  try {
    return sim::simulate_period(run.persona, cfg.start, cfg.days, run.scripts, cfg.seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(run.persona.id + ": " + e.what());
  }
}

void write_sim(const sim::SimOutput& out, const fs::path& dir, bool frames) {
  std::ostringstream csv;
  if (frames) {
    io::write_frames_csv(csv, out.meter_id, sim::emit_frames(out));
    write_file(dir / ("frames_" + out.meter_id + ".csv"), csv.str());
  } else {
    io::write_readings_csv(csv, out.readings);
    write_file(dir / ("readings_" + out.meter_id + ".csv"), csv.str());
  }
  write_file(dir / ("truth_" + out.meter_id + ".json"), io::canonical(io::truth_to_json(out)));
}

// Writes every artifact of one meter's analysis and returns it.
pipeline::Analysis analyze_and_write(const store::TelemetryStore& store, const std::string& meter,
                                     const RunConfig& cfg) {
  auto a = pipeline::analyze_meter(store, meter, cfg);
  const fs::path& dir = cfg.out_dir;
  std::ostringstream profiles;
  io::write_profiles_csv(profiles, a.profiles.profiles);
  write_file(dir / ("profiles_" + meter + ".csv"), profiles.str());
  write_file(dir / ("model_" + meter + ".json"), io::canonical(io::model_to_json(meter, a.model)));
  if (a.selection) {
    write_file(dir / ("kselect_" + meter + ".json"), io::canonical(io::selection_to_json(meter, *a.selection)));
  }
  write_file(dir / ("anomalies_" + meter + ".json"), io::canonical(pipeline::anomaly_json(a, cfg)));
  write_file(dir / ("clusters_" + meter + ".svg"), charts::cluster_chart(a));
  write_file(dir / ("anomalies_" + meter + ".svg"), charts::anomaly_chart(a, cfg.top_n));

  std::cout << meter << ": " << a.profiles.profiles.size() << " days, k = " << a.model.k;
  if (a.selection) std::cout << " (recommended " << a.selection->recommended_k << ")";
  std::cout << ", flagged";
  if (a.anomalies.flagged.empty()) std::cout << " none";
  for (const auto& d : a.anomalies.flagged) std::cout << " " << format_date(d);
  std::cout << "\n";
  return a;
}

void analyze_all(const store::TelemetryStore& store, std::vector<std::string> meters, const RunConfig& cfg) {
  if (meters.empty()) meters = store.meters();
  if (meters.empty()) throw std::runtime_error("no readings");
  std::vector<pipeline::Analysis> all;
  for (const auto& m : meters) all.push_back(analyze_and_write(store, m, cfg));
  write_file(cfg.out_dir / "centroids.svg", charts::centroid_chart(all));
}

int serve(store::TelemetryStore& store, const RunConfig& cfg, const std::string& host, int port) {
  // Block the shutdown signals before any thread starts so only the
  // waiter below receives them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  service::Server server(store, cfg);
  const int bound = server.bind(host, port);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  std::cerr << "listening on " << host << ":" << bound << std::endl;
  server.listen();
  ::kill(::getpid(), SIGTERM);  // releases the waiter when listen ended on its own
  waiter.join();
  std::cerr << "stopped" << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meterwatch: smart meter load profiles and anomalous days"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "meterwatch 1.0.0");
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags win over it")->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "Simulate persona households and write readings CSV and truth labels");
  SimFlags sim_flags;
  sim_flags.add(simulate, true);
  simulate->add_flag("--frames", sim_flags.frames, "Write raw readout frames (hex) instead of readings");

  auto* ingest = app.add_subcommand("ingest", "Ingest readings or frame CSV files into the data directory");
  std::vector<std::string> ingest_files;
  ingest->add_option("files", ingest_files, "CSV files")->required()->check(CLI::ExistingFile);

  auto* analyze = app.add_subcommand("analyze", "Cluster daily profiles and rank anomalous days");
  std::vector<std::string> analyze_files, analyze_meters;
  std::string analyze_out;
  analyze->add_option("files", analyze_files, "CSV files (default: the data directory store)")->check(CLI::ExistingFile);
  analyze->add_option("--meter", analyze_meters, "Meters to analyze (default: all)");
  auto* analyze_out_opt = analyze->add_option("--out", analyze_out, "Output directory");
  AnalysisFlags analyze_flags;
  analyze_flags.add(analyze);

  auto* serve_cmd = app.add_subcommand("serve", "Serve ingestion, power and anomaly endpoints over HTTP");
  std::string host = "127.0.0.1";
  int port = 8080;
  serve_cmd->add_option("--host", host, "Listen address");
  serve_cmd->add_option("--port", port, "Listen port (0 picks a free one)")->check(CLI::Range(0, 65535));
  AnalysisFlags serve_flags;
  serve_flags.add(serve_cmd);

  auto* casestudy = app.add_subcommand("casestudy", "Simulate S1..S4 with the case-study anomalies and analyze them");
  SimFlags cs_flags;
  cs_flags.add(casestudy, false);
  int cs_k = 3;
  auto* cs_k_opt = casestudy->add_option("--k", cs_k, "Cluster count")->check(CLI::Range(1, 6));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) pipeline::apply_json(cfg, read_json_file(config_path));

    if (simulate->parsed()) {
      sim_flags.apply(cfg);
      cfg.validate();
      const auto runs = load_personas(cfg, sim_flags, sim_flags.o_personas->count() > 0);
      for (const auto& run : runs) {
        const auto out = simulate_one(run, cfg);
        write_sim(out, cfg.out_dir, sim_flags.frames);
        std::cout << out.meter_id << ": " << out.readings.size() << " readings\n";
      }
      return 0;
    }

    if (ingest->parsed()) {
      const fs::path dir = data_dir();
      fs::create_directories(dir);
      store::TelemetryStore store(dir / kStoreFile);
      store::StoreStats total;
      for (const auto& f : ingest_files) total += store.ingest(read_csv_file(f));
      std::cout << io::canonical(io::stats_to_json(total));
      return 0;
    }

    if (analyze->parsed()) {
      analyze_flags.apply(cfg);
      if (analyze_out_opt->count()) cfg.out_dir = analyze_out;
      cfg.validate();
      if (!analyze_files.empty()) {
        store::TelemetryStore store;
        for (const auto& f : analyze_files) store.ingest(read_csv_file(f));
        analyze_all(store, analyze_meters, cfg);
      } else {
        const fs::path log = data_dir() / kStoreFile;
        if (!fs::exists(log)) throw std::runtime_error("no readings (nothing ingested into " + data_dir().string() + ")");
        store::TelemetryStore store(log);
        analyze_all(store, analyze_meters, cfg);
      }
      return 0;
    }

    if (serve_cmd->parsed()) {
      serve_flags.apply(cfg);
      cfg.validate();
      const fs::path dir = data_dir();
      fs::create_directories(dir);
      store::TelemetryStore store(dir / kStoreFile);
      return serve(store, cfg, host, port);
    }

    if (casestudy->parsed()) {
      cs_flags.apply(cfg);
      if (cs_k_opt->count() || !cfg.k) cfg.k = cs_k;
      if (!cs_flags.o_out->count() && config_path.empty()) cfg.out_dir = "casestudy";
      cfg.personas = {"S1", "S2", "S3", "S4"};
      cfg.validate();
      store::TelemetryStore store;
      for (const auto& id : cfg.personas) {
        PersonaRun run{sim::build_persona(id), pipeline::casestudy_scripts(id, cfg.start, cfg.days)};
        const auto out = simulate_one(run, cfg);
        write_sim(out, cfg.out_dir, false);
        store.ingest(out.readings);
      }
      analyze_all(store, cfg.personas, cfg);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
