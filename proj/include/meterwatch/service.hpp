#pragma once

// HTTP adapter over the telemetry store and the analysis pipeline.
//
//   POST /v1/readings                 NDJSON readings -> StoreStats delta
//   GET  /v1/meters                   known meter ids
//   GET  /v1/meters/{id}/power        ?from=&to= (RFC 3339)
//   GET  /v1/meters/{id}/anomalies    ?k=&k_max=&seed=&restarts=&min_completeness=&top=&threshold=&serial=
//   GET  /v1/health
//
// Errors come back as {"error": "..."} with 400 (bad request), 404
// (unknown meter), 409 (insufficient data) or 422 (rejected batch). An
// Authorization header is accepted and ignored.

#include <memory>
#include <string>

#include "meterwatch/pipeline.hpp"
#include "meterwatch/telemetry_store.hpp"

namespace meterwatch::service {

class Server {
 public:
  /// Query parameters of the anomalies endpoint override `defaults`.
  Server(store::TelemetryStore& store, pipeline::RunConfig defaults);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the listening socket and returns the port (port 0 picks a free
  /// one). Throws std::runtime_error when the address is unavailable.
  int bind(const std::string& host, int port);

  /// Serves until stop(); requires a successful bind().
  void listen();

  /// Safe from any thread.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace meterwatch::service
