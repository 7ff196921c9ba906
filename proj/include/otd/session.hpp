#pragma once

// Live guard sessions with an append-only event log.
//
// Each session lives in two files inside the data directory:
//   <id>.meta.json  creation metadata, replaced atomically
//   <id>.jsonl      one event per line: "<crc32 hex> <json>\n"
// The in-memory state is always the result of replaying the log.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "otd/closure.hpp"
#include "otd/evalues.hpp"
#include "otd/guard.hpp"
#include "otd/trace.hpp"

namespace otd {

// Error categories surfaced by the service layer.
class InvalidRequest : public std::invalid_argument {
 public:
  InvalidRequest(const std::string& field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Conflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LogCorrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GuardMethod { seq_e, ex_e, arb_e };

struct ProcedureSpec {
  GuardMethod method = GuardMethod::seq_e;
  double alpha = 0.05;
  GammaWeights gamma;  ///< used by arbe-guard only
  bool boosting = false;
  /// ExE-Guard boosting with truncation at t / alpha; off unless asked for.
  bool experimental_exe_boost = false;

  nlohmann::json to_json() const;
  /// Throws InvalidRequest naming the offending field.
  static ProcedureSpec from_json(const nlohmann::json& j);
};

/// Evidence that has been submitted but not yet decided on.
struct PendingEvidence {
  std::size_t index = 0;
  LogValue raw;             ///< e-value before boosting
  LogValue e;               ///< e-value handed to the guard
  double boost_factor = 1.0;
  std::optional<LogValue> cutoff;  ///< m_t when defined for the method
  bool saturated = false;
  nlohmann::json source;    ///< the submitted payload
  std::optional<LogValue> gro_raw;  ///< raw GRO e-value feeding the tau-hat schedule

  nlohmann::json to_json() const;
  static PendingEvidence from_json(const nlohmann::json& j);
};

struct WhatIfResult {
  std::size_t bound = 0;
  std::vector<std::size_t> minimizer;
};

struct SessionSummary {
  std::string id;
  std::string created;
  std::string updated;
  std::size_t t = 0;
  std::size_t d = 0;
  std::size_t query_size = 0;
  bool pending = false;
  nlohmann::json spec;
};

inline constexpr std::size_t kTracePage = 1000;

class SessionStore {
 public:
  /// Opens (creating if needed) the data directory and replays every session
  /// found there. A torn final log line is dropped and the file truncated;
  /// other corruption throws LogCorrupted.
  explicit SessionStore(std::filesystem::path data_dir);
  ~SessionStore();

  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  /// Same token, same id.
  std::string create(const nlohmann::json& spec, const std::optional<std::string>& request_token = std::nullopt);
  std::vector<SessionSummary> list() const;

  nlohmann::json submit_evidence(const std::string& id, const nlohmann::json& payload);
  nlohmann::json decide(const std::string& id, bool include);
  /// Throws OracleCapExceeded when t exceeds the oracle cap.
  WhatIfResult what_if(const std::string& id, const std::vector<std::size_t>& subset);
  /// Events with seq > since (at most kTracePage) plus the current bound trace.
  nlohmann::json trace(const std::string& id, std::uint64_t since) const;
  std::string export_csv(const std::string& id) const;

  std::string state_hash(const std::string& id) const;
  std::size_t bound(const std::string& id) const;

  const std::filesystem::path& data_dir() const { return dir_; }

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id) const;
  void load(const std::string& id);

  std::filesystem::path dir_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::string> tokens_;
};

/// crc32 of a log line body as 8 lowercase hex digits.
std::string line_checksum(const std::string& body);

}  // namespace otd
