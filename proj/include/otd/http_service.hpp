#pragma once

// JSON-over-HTTP front end for a SessionStore.
//
//   POST /sessions                     {spec..., "request_token"?}  -> {"id"}
//   GET  /sessions                                                  -> [summary]
//   POST /sessions/{id}/evidence       evidence payload             -> pending view
//   POST /sessions/{id}/decision       {"include": bool}            -> step outcome
//   POST /sessions/{id}/whatif         {"subset": [i...]}           -> {"bound", "minimizer"}
//   GET  /sessions/{id}/trace?since=K                               -> events + bound trace
//   GET  /sessions/{id}/export.csv                                  -> bound trace CSV
//
// Errors carry {"error": message[, "field"][, "cap"]} with status 400, 404,
// 409 or 422 (oracle cap).

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "otd/session.hpp"

namespace otd {

class HttpService {
 public:
  explicit HttpService(SessionStore& store, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the bound
  /// port or -1 when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called. Requires a successful bind().
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace otd
