#include "meterwatch/service.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>
#include <chrono>
#include <stdexcept>
#include <thread>

#include "meterwatch/io.hpp"

namespace meterwatch::service {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(io::canonical(body), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& msg) { reply(res, status, {{"error", msg}}); }

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end) throw pipeline::UsageError("bad value '" + text + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true") return true;
  if (text == "0" || text == "false") return false;
  throw pipeline::UsageError("bad value '" + text + "' for " + key);
}

pipeline::RunConfig query_config(const httplib::Request& req, pipeline::RunConfig cfg) {
  for (const auto& [key, value] : req.params) {
    if (key == "k") {
      if (value == "auto") {
        cfg.k.reset();
      } else {
        cfg.k = parse_number<int>(key, value);
      }
    } else if (key == "k_max") {
      cfg.k_max = parse_number<int>(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "restarts") {
      cfg.restarts = parse_number<int>(key, value);
    } else if (key == "min_completeness") {
      cfg.min_completeness = parse_number<double>(key, value);
    } else if (key == "top") {
      cfg.top_n = parse_number<std::size_t>(key, value);
    } else if (key == "threshold") {
      cfg.threshold = io::parse_threshold_rule(value);
    } else if (key == "serial") {
      cfg.exec = parse_bool(key, value) ? kernels::Exec::serial : kernels::Exec::openmp;
    } else {
      throw pipeline::UsageError("unknown parameter '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

std::optional<Instant> time_param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  const auto t = try_parse_rfc3339(req.get_param_value(key));
  if (!t) throw pipeline::UsageError(std::string("bad timestamp for ") + key);
  return t;
}

// Maps library exceptions to status codes.
template <typename F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const pipeline::UnknownMeter& e) {
    fail(res, 404, e.what());
  } catch (const pipeline::InsufficientData& e) {
    fail(res, 409, e.what());
  } catch (const store::StoreError& e) {
    fail(res, 422, e.what());
  } catch (const io::FormatError& e) {
    fail(res, 400, e.what());
  } catch (const std::invalid_argument& e) {
    fail(res, 400, e.what());
  } catch (const std::exception& e) {
    fail(res, 500, e.what());
  }
}

}  // namespace

struct Server::Impl {
  store::TelemetryStore& store;
  pipeline::RunConfig defaults;
  httplib::Server http;
  bool bound = false;
  std::atomic<bool> listening{false};
  std::atomic<bool> stop_requested{false};

  Impl(store::TelemetryStore& s, pipeline::RunConfig d) : store(s), defaults(std::move(d)) {}

  void routes() {
    http.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"status", "ok"}}); });

    http.Post("/v1/readings", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto batch = io::read_ndjson(req.body);
        reply(res, 200, io::stats_to_json(store.ingest(batch)));
      });
    });

    http.Get("/v1/meters", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"meters", store.meters()}});
    });

    http.Get(R"(/v1/meters/([^/]+)/power)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string meter = req.matches[1];
        const auto from = time_param(req, "from");
        const auto to = time_param(req, "to");
        reply(res, 200, io::power_to_json(pipeline::power_series(store, meter, from, to)));
      });
    });

    http.Get(R"(/v1/meters/([^/]+)/anomalies)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string meter = req.matches[1];
        const auto cfg = query_config(req, defaults);
        const auto analysis = pipeline::analyze_meter(store, meter, cfg);
        reply(res, 200, pipeline::anomaly_json(analysis, cfg));
      });
    });
  }
};

Server::Server(store::TelemetryStore& store, pipeline::RunConfig defaults)
    : impl_(std::make_unique<Impl>(store, std::move(defaults))) {
  // The library default adds SO_REUSEPORT, which lets a second server
  // share a busy port; keep only SO_REUSEADDR.
  impl_->http.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  impl_->routes();
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = impl_->http.bind_to_any_port(host);
    if (p < 0) throw std::runtime_error("cannot bind " + host);
    impl_->bound = true;
    return p;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port) + " (address in use?)");
  }
  impl_->bound = true;
  return port;
}

void Server::listen() {
  if (!impl_->bound) throw std::logic_error("listen() before bind()");
  impl_->listening = true;
  if (!impl_->stop_requested) impl_->http.listen_after_bind();
  impl_->listening = false;
}

void Server::stop() {
  if (!impl_) return;
  // A stop that races ahead of listen() must still end it.
  impl_->stop_requested = true;
  // listen() may still bail out on the flag, so wait on either outcome.
  while (impl_->listening && !impl_->http.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  if (impl_->listening) impl_->http.stop();
}

}  // namespace meterwatch::service
