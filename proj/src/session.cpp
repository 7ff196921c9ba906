#include "otd/session.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

namespace otd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using AnyGuard = std::variant<SeqEGuard, ExEGuard, ArbEGuard>;

std::string now_rfc3339() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

std::string random_id() {
  static std::mutex mu;
  static std::mt19937_64 gen{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
  return buf;
}

std::string log_string(LogValue v) { return format_double(v.log()); }

LogValue parse_log(const json& j, const std::string& field) {
  try {
    if (j.is_string()) return LogValue::from_log(parse_double(j.get<std::string>()));
    if (j.is_number()) return LogValue::from_log(j.get<double>());
  } catch (const std::invalid_argument&) {
  }
  throw InvalidRequest(field, "expected a decimal string");
}

double number_field(const json& obj, const std::string& key, const std::string& field) {
  if (!obj.contains(key)) throw InvalidRequest(field, "missing");
  const auto& v = obj.at(key);
  if (!v.is_number()) throw InvalidRequest(field, "expected a number");
  const double d = v.get<double>();
  if (std::isnan(d)) throw InvalidRequest(field, "must not be NaN");
  return d;
}

double number_or(const json& obj, const std::string& key, double fallback, const std::string& field) {
  return obj.contains(key) ? number_field(obj, key, field) : fallback;
}

json value_or_null(LogValue v) {
  if (v.is_infinite()) return nullptr;
  return v.value();
}

AnyGuard make_guard(const ProcedureSpec& spec) {
  switch (spec.method) {
    case GuardMethod::seq_e:
      return SeqEGuard(spec.alpha);
    case GuardMethod::ex_e:
      return ExEGuard(spec.alpha);
    case GuardMethod::arb_e:
      return ArbEGuard(spec.alpha, spec.gamma);
  }
  throw std::logic_error("unknown guard method");
}

const GuardState& guard_state(const AnyGuard& g) {
  return std::visit([](const auto& x) -> const GuardState& { return x.state(); }, g);
}

StepOutcome guard_step(AnyGuard& g, LogValue e, bool include) {
  return std::visit([&](auto& x) { return x.step(e, include); }, g);
}

IntersectionFamily family_for(const ProcedureSpec& spec) {
  switch (spec.method) {
    case GuardMethod::seq_e:
      return IntersectionFamily::product(spec.alpha);
    case GuardMethod::ex_e:
      return IntersectionFamily::average(spec.alpha);
    case GuardMethod::arb_e:
      return IntersectionFamily::weighted(spec.alpha, spec.gamma);
  }
  throw std::logic_error("unknown guard method");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_all(int fd, const std::string& data) {
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("event log write failed: ") + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

std::string line_checksum(const std::string& body) {
  const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc & 0xFFFFFFFFUL));
  return buf;
}

// ---------------------------------------------------------------------------
// ProcedureSpec / PendingEvidence serialization

json ProcedureSpec::to_json() const {
  json j;
  switch (method) {
    case GuardMethod::seq_e: j["method"] = "seq-e-guard"; break;
    case GuardMethod::ex_e: j["method"] = "exe-guard"; break;
    case GuardMethod::arb_e: j["method"] = "arbe-guard"; break;
  }
  j["alpha"] = alpha;
  j["boosting"] = boosting;
  if (experimental_exe_boost) j["experimental_exe_boost"] = true;
  if (method == GuardMethod::arb_e) {
    switch (gamma.kind()) {
      case GammaWeights::Kind::inverse_square: j["gamma"] = "inverse-square"; break;
      case GammaWeights::Kind::geometric: j["gamma"] = {{"geometric", gamma.ratio()}}; break;
      case GammaWeights::Kind::explicit_list: j["gamma"] = gamma.values(); break;
    }
  }
  return j;
}

ProcedureSpec ProcedureSpec::from_json(const json& j) {
  if (!j.is_object()) throw InvalidRequest("spec", "expected a JSON object");
  ProcedureSpec s;
  const std::string method = j.value("method", std::string("seq-e-guard"));
  if (method == "seq-e-guard") s.method = GuardMethod::seq_e;
  else if (method == "exe-guard") s.method = GuardMethod::ex_e;
  else if (method == "arbe-guard") s.method = GuardMethod::arb_e;
  else throw InvalidRequest("method", "unknown method '" + method + "'");
  if (!j.contains("alpha")) throw InvalidRequest("alpha", "missing");
  s.alpha = number_field(j, "alpha", "alpha");
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw InvalidRequest("alpha", "must lie in (0, 1)");
  if (j.contains("boosting")) {
    if (!j["boosting"].is_boolean()) throw InvalidRequest("boosting", "expected a boolean");
    s.boosting = j["boosting"].get<bool>();
  }
  if (j.contains("experimental_exe_boost")) {
    if (!j["experimental_exe_boost"].is_boolean()) throw InvalidRequest("experimental_exe_boost", "expected a boolean");
    s.experimental_exe_boost = j["experimental_exe_boost"].get<bool>();
  }
  if (j.contains("gamma")) {
    const auto& g = j["gamma"];
    try {
      if (g.is_string() && g.get<std::string>() == "inverse-square") {
        s.gamma = GammaWeights::inverse_square();
      } else if (g.is_object() && g.contains("geometric") && g["geometric"].is_number()) {
        s.gamma = GammaWeights::geometric(g["geometric"].get<double>());
      } else if (g.is_array()) {
        s.gamma = GammaWeights::explicit_list(g.get<std::vector<double>>());
      } else {
        throw InvalidRequest("gamma", "expected \"inverse-square\", {\"geometric\": q} or a list");
      }
    } catch (const InvalidRequest&) {
      throw;
    } catch (const std::exception& e) {
      throw InvalidRequest("gamma", e.what());
    }
    if (!s.gamma.nonincreasing()) throw InvalidRequest("gamma", "weights must be nonincreasing");
  }
  if (s.boosting) {
    if (s.method == GuardMethod::arb_e) throw InvalidRequest("boosting", "not available for arbe-guard");
    if (s.method == GuardMethod::ex_e && !s.experimental_exe_boost) {
      throw InvalidRequest("boosting", "exe-guard boosting requires experimental_exe_boost");
    }
  }
  return s;
}

json PendingEvidence::to_json() const {
  json j{{"index", index},
         {"raw_log_e", log_string(raw)},
         {"log_e", log_string(e)},
         {"e", value_or_null(e)},
         {"boost_factor", boost_factor},
         {"saturated", saturated},
         {"source", source}};
  if (cutoff) {
    j["log_m_t"] = log_string(*cutoff);
    j["m_t"] = value_or_null(*cutoff);
  }
  if (gro_raw) j["gro_raw_log_e"] = log_string(*gro_raw);
  return j;
}

PendingEvidence PendingEvidence::from_json(const json& j) {
  PendingEvidence p;
  p.index = j.at("index").get<std::size_t>();
  p.raw = parse_log(j.at("raw_log_e"), "raw_log_e");
  p.e = parse_log(j.at("log_e"), "log_e");
  p.boost_factor = j.at("boost_factor").get<double>();
  p.saturated = j.value("saturated", false);
  p.source = j.value("source", json::object());
  if (j.contains("log_m_t")) p.cutoff = parse_log(j["log_m_t"], "log_m_t");
  if (j.contains("gro_raw_log_e")) p.gro_raw = parse_log(j["gro_raw_log_e"], "gro_raw_log_e");
  return p;
}

// ---------------------------------------------------------------------------
// Session

struct SessionStore::Session {
  Session(std::string id_, ProcedureSpec spec_) : id(std::move(id_)), spec(std::move(spec_)), guard(make_guard(spec)) {}
  ~Session() {
    if (fd >= 0) ::close(fd);
  }

  std::string id;
  ProcedureSpec spec;
  AnyGuard guard;
  std::string created;
  std::string updated;
  std::optional<std::string> token;
  std::optional<PendingEvidence> pending;
  HedgeSchedule schedule = HedgeSchedule::adaptive();
  std::vector<LogValue> committed;
  BoundTrace trace;
  std::vector<json> events;
  int fd = -1;
  mutable std::mutex mu;

  std::uint64_t head() const { return events.size(); }

  // Applies one event to the in-memory state. `replaying` enables the
  // consistency checks on recorded outcomes.
  void apply(const json& ev, bool replaying) {
    const std::string kind = ev.at("kind").get<std::string>();
    updated = ev.value("time", updated);
    if (kind == "created") {
      created = ev.value("time", std::string());
    } else if (kind == "evidence") {
      if (pending) throw LogCorrupted("evidence event while evidence is pending");
      PendingEvidence p = PendingEvidence::from_json(ev.at("evidence"));
      if (p.index != committed.size() + 1) throw LogCorrupted("evidence index out of order");
      if (p.gro_raw) schedule = tau_hat_update(schedule, *p.gro_raw);
      pending = std::move(p);
    } else if (kind == "decision") {
      if (!pending) throw LogCorrupted("decision without pending evidence");
      const bool include = ev.at("include").get<bool>();
      const StepOutcome out = guard_step(guard, pending->e, include);
      if (replaying && ev.at("d").get<std::size_t>() != out.bound) throw LogCorrupted("decision outcome mismatch");
      committed.push_back(pending->e);
      trace.push_back(make_row(out, guard_state(guard).query.size()));
      pending.reset();
    } else if (kind == "bound_change") {
      if (replaying && ev.at("d").get<std::size_t>() != guard_state(guard).bound) {
        throw LogCorrupted("bound_change does not match replayed bound");
      }
    } else if (kind == "whatif") {
      // read-only
    } else {
      throw LogCorrupted("unknown event kind '" + kind + "'");
    }
    events.push_back(ev);
  }

  // Writes the event to disk, then applies it.
  void record(json ev) {
    ev["seq"] = head() + 1;
    ev["time"] = now_rfc3339();
    const std::string body = ev.dump();
    write_all(fd, line_checksum(body) + " " + body + "\n");
    apply(ev, false);
  }

  std::string hash() const {
    std::ostringstream os;
    const GuardState& g = guard_state(guard);
    os << "t=" << g.t << ";d=" << g.bound << ";S=";
    for (auto i : g.query) os << i << ',';
    os << ";A=";
    for (const auto& a : g.active) os << a.index << ':' << log_string(a.e) << ',';
    os << ";U=";
    for (const auto& u : g.discarded) os << u.index << ':' << log_string(u.e) << ',';
    os << ";X=";
    for (auto i : g.excluded) os << i << ',';
    os << ";E=";
    for (const auto& e : committed) os << log_string(e) << ',';
    os << ";P=";
    if (pending) os << pending->index << ':' << log_string(pending->e);
    os << ";H=" << schedule.observed << '/' << schedule.above_one;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(os.str())));
    return buf;
  }

  PendingEvidence build_evidence(const json& payload) const {
    if (!payload.is_object()) throw InvalidRequest("evidence", "expected a JSON object");
    PendingEvidence p;
    p.index = committed.size() + 1;
    p.source = payload;
    std::optional<std::pair<double, double>> null_model;  // (delta, lambda)

    if (payload.contains("e")) {
      const auto& v = payload["e"];
      double e = 0.0;
      if (v.is_number()) {
        e = v.get<double>();
      } else if (v.is_string()) {
        try {
          e = parse_double(v.get<std::string>());
        } catch (const std::invalid_argument&) {
          throw InvalidRequest("e", "expected a nonnegative number");
        }
      } else {
        throw InvalidRequest("e", "expected a nonnegative number");
      }
      if (!(e >= 0.0)) throw InvalidRequest("e", "must be nonnegative");
      p.raw = std::isinf(e) ? LogValue::infinity() : LogValue::from_value(e);
    } else if (payload.contains("log_e")) {
      p.raw = parse_log(payload["log_e"], "log_e");
      if (std::isnan(p.raw.log())) throw InvalidRequest("log_e", "must not be NaN");
    } else if (payload.contains("p")) {
      const double pv = number_field(payload, "p", "p");
      if (!(pv >= 0.0 && pv <= 1.0)) throw InvalidRequest("p", "must lie in [0, 1]");
      if (!payload.contains("transform") || !payload["transform"].is_object()) {
        throw InvalidRequest("transform", "a p-value needs a transform object");
      }
      const json& tr = payload["transform"];
      const std::string kind = tr.value("kind", std::string());
      try {
        if (kind == "online-simple") {
          const double ai = number_field(tr, "alpha_i", "transform.alpha_i");
          if (!(ai >= 0.0 && ai <= 1.0)) throw InvalidRequest("transform.alpha_i", "must lie in [0, 1]");
          const auto params = OnlineSimpleParams::make(spec.alpha, number_or(tr, "a", 1.0, "transform.a"));
          p.raw = online_simple_evalue(pv, ai, params);
          if (tr.value("admissible", false)) p.raw = p.raw / LogValue::from_value(online_simple_slack(ai, params));
        } else if (kind == "freedman") {
          const double ai = number_field(tr, "alpha_i", "transform.alpha_i");
          if (!(ai >= 0.0 && ai <= 1.0)) throw InvalidRequest("transform.alpha_i", "must lie in [0, 1]");
          p.raw = freedman_evalue(pv, ai, FreedmanParams::make(spec.alpha, number_or(tr, "a", 1.0, "transform.a")));
        } else if (kind == "calibrator") {
          const double x = number_or(tr, "x", 0.1, "transform.x");
          const auto c = calibrate_lift(pv, x);
          p.raw = c.e;
          p.saturated = c.saturated;
          null_model = {x, 1.0};
        } else {
          throw InvalidRequest("transform.kind", "expected online-simple, freedman or calibrator");
        }
      } catch (const InvalidRequest&) {
        throw;
      } catch (const std::exception& e) {
        throw InvalidRequest("transform", e.what());
      }
    } else if (payload.contains("x")) {
      const double x = number_field(payload, "x", "x");
      if (!std::isfinite(x)) throw InvalidRequest("x", "must be finite");
      if (!payload.contains("gro") || !payload["gro"].is_object()) throw InvalidRequest("gro", "an observation needs a gro object");
      const json& g = payload["gro"];
      const double mu0 = number_or(g, "mu0", 0.0, "gro.mu0");
      const double mu1 = number_field(g, "mu1", "gro.mu1");
      if (mu1 == mu0) throw InvalidRequest("gro.mu1", "must differ from mu0");
      double lambda = 1.0;
      if (g.contains("hedge")) {
        const auto& h = g["hedge"];
        if (h.is_string() && h.get<std::string>() == "tau-hat") {
          lambda = schedule.next_lambda();
        } else if (h.is_number()) {
          lambda = h.get<double>();
          if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidRequest("gro.hedge", "must lie in [0, 1]");
        } else {
          throw InvalidRequest("gro.hedge", "expected a number or \"tau-hat\"");
        }
      }
      const LogValue lr = gro_gaussian_evalue(x, mu0, mu1);
      p.gro_raw = lr;
      p.raw = hedge(lr, lambda);
      null_model = {std::fabs(mu1 - mu0), lambda};
    } else {
      throw InvalidRequest("evidence", "need one of e, log_e, p or x");
    }

    if (payload.contains("null_model") && !payload.contains("p") && !payload.contains("x")) {
      const json& nm = payload["null_model"];
      if (!nm.is_object()) throw InvalidRequest("null_model", "expected an object");
      const double delta = number_field(nm, "delta", "null_model.delta");
      const double lambda = number_or(nm, "lambda", 1.0, "null_model.lambda");
      if (!(delta > 0.0)) throw InvalidRequest("null_model.delta", "must be positive");
      if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidRequest("null_model.lambda", "must lie in [0, 1]");
      null_model = {delta, lambda};
    }

    if (spec.method == GuardMethod::seq_e) {
      p.cutoff = std::get<SeqEGuard>(guard).boosting_cutoff();
    } else if (spec.method == GuardMethod::ex_e && spec.experimental_exe_boost) {
      p.cutoff = LogValue::from_value(static_cast<double>(p.index) / spec.alpha);
    }
    p.e = p.raw;
    if (spec.boosting && null_model && p.cutoff) {
      const double m = p.cutoff->is_infinite() ? std::numeric_limits<double>::infinity() : p.cutoff->value();
      p.boost_factor = boost_factor_hedged_lognormal(null_model->first, null_model->second, m);
      p.e = p.raw * LogValue::from_value(p.boost_factor);
    }
    return p;
  }

  json trace_json(std::uint64_t since) const {
    json evs = json::array();
    for (std::uint64_t s = since; s < events.size() && evs.size() < kTracePage; ++s) evs.push_back(events[s]);
    json rows = json::array();
    for (const auto& r : trace) {
      rows.push_back({{"t", r.t},
                      {"included", r.included},
                      {"d", r.d},
                      {"query_size", r.query_size},
                      {"tdp_bound", r.tdp_bound()},
                      {"log_statistic", format_double(r.log_statistic)}});
    }
    const GuardState& g = guard_state(guard);
    return {{"id", id},
            {"head", head()},
            {"events", evs},
            {"trace", rows},
            {"t", g.t},
            {"d", g.bound},
            {"query_size", g.query.size()},
            {"pending", pending ? pending->to_json() : json(nullptr)},
            {"state_hash", hash()},
            {"spec", spec.to_json()}};
  }
};

// ---------------------------------------------------------------------------
// SessionStore

SessionStore::SessionStore(fs::path data_dir) : dir_(std::move(data_dir)) {
  fs::create_directories(dir_);
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) load(id);
}

SessionStore::~SessionStore() = default;

void SessionStore::load(const std::string& id) {
  const fs::path log_path = dir_ / (id + ".jsonl");
  std::string content;
  {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + log_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    content = ss.str();
  }
  std::vector<json> events;
  std::size_t good_end = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const std::size_t nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string line = content.substr(pos, terminated ? nl - pos : std::string::npos);
    const std::size_t next = terminated ? nl + 1 : content.size();
    bool ok = terminated && line.size() > 9 && line[8] == ' ';
    json ev;
    if (ok) {
      const std::string body = line.substr(9);
      ok = line.compare(0, 8, line_checksum(body)) == 0;
      if (ok) {
        try {
          ev = json::parse(body);
        } catch (const json::exception&) {
          ok = false;
        }
      }
    }
    if (!ok) {
      if (next < content.size()) {
        throw LogCorrupted(log_path.string() + ": corrupt event at byte " + std::to_string(pos));
      }
      break;  // torn tail
    }
    events.push_back(std::move(ev));
    good_end = next;
    pos = next;
  }
  if (good_end < content.size()) fs::resize_file(log_path, good_end);

  if (events.empty() || events.front().value("kind", std::string()) != "created") {
    // The create call never completed.
    fs::remove(log_path);
    fs::remove(dir_ / (id + ".meta.json"));
    return;
  }
  ProcedureSpec spec;
  try {
    spec = ProcedureSpec::from_json(events.front().at("spec"));
  } catch (const std::exception& e) {
    throw LogCorrupted(log_path.string() + ": bad spec: " + e.what());
  }
  auto s = std::make_shared<Session>(id, spec);
  if (events.front().contains("request_token")) s->token = events.front()["request_token"].get<std::string>();
  bool owes_bound_change = false;
  for (std::size_t k = 0; k < events.size(); ++k) {
    const json& ev = events[k];
    if (ev.value("seq", std::uint64_t{0}) != k + 1) throw LogCorrupted(log_path.string() + ": sequence gap");
    const std::size_t before = guard_state(s->guard).bound;
    try {
      s->apply(ev, true);
    } catch (const LogCorrupted&) {
      throw;
    } catch (const std::exception& e) {
      throw LogCorrupted(log_path.string() + ": " + e.what());
    }
    if (ev["kind"] == "decision") owes_bound_change = guard_state(s->guard).bound > before;
    else if (ev["kind"] == "bound_change") owes_bound_change = false;
  }
  s->fd = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
  if (s->fd < 0) throw std::runtime_error("cannot open " + log_path.string());
  if (owes_bound_change) {
    const GuardState& g = guard_state(s->guard);
    json ev{{"kind", "bound_change"}, {"index", g.t}, {"d", g.bound}};
    if (!g.excluded.empty()) ev["removed_index"] = g.excluded.back();
    s->record(ev);
  }
  if (s->token) tokens_[*s->token] = id;
  sessions_[id] = std::move(s);
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
  return it->second;
}

std::string SessionStore::create(const json& spec_json, const std::optional<std::string>& request_token) {
  const ProcedureSpec spec = ProcedureSpec::from_json(spec_json);
  std::unique_lock lock(map_mutex_);
  if (request_token) {
    auto it = tokens_.find(*request_token);
    if (it != tokens_.end()) return it->second;
  }
  std::string id;
  do {
    id = random_id();
  } while (sessions_.count(id) > 0);
  auto s = std::make_shared<Session>(id, spec);
  s->token = request_token;
  const fs::path log_path = dir_ / (id + ".jsonl");
  json meta{{"id", id}, {"spec", spec.to_json()}, {"created", now_rfc3339()}};
  if (request_token) meta["request_token"] = *request_token;
  write_file_atomic(dir_ / (id + ".meta.json"), meta.dump(2) + "\n");
  s->fd = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (s->fd < 0) throw std::runtime_error("cannot create " + log_path.string());
  json ev{{"kind", "created"}, {"spec", spec.to_json()}};
  if (request_token) ev["request_token"] = *request_token;
  s->record(ev);
  if (request_token) tokens_[*request_token] = id;
  sessions_[id] = std::move(s);
  return id;
}

std::vector<SessionSummary> SessionStore::list() const {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::shared_lock lock(map_mutex_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  std::vector<SessionSummary> out;
  for (const auto& s : all) {
    std::lock_guard lock(s->mu);
    const GuardState& g = guard_state(s->guard);
    out.push_back({s->id, s->created, s->updated, g.t, g.bound, g.query.size(), s->pending.has_value(),
                   s->spec.to_json()});
  }
  return out;
}

json SessionStore::submit_evidence(const std::string& id, const json& payload) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (s->pending) throw Conflict("evidence " + std::to_string(s->pending->index) + " is still pending");
  PendingEvidence p = s->build_evidence(payload);
  s->record({{"kind", "evidence"}, {"evidence", p.to_json()}});
  return s->pending->to_json();
}

json SessionStore::decide(const std::string& id, bool include) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  if (!s->pending) throw Conflict("no pending evidence");
  AnyGuard preview = s->guard;
  const StepOutcome out = guard_step(preview, s->pending->e, include);
  s->record({{"kind", "decision"},
             {"index", out.t},
             {"include", include},
             {"d", out.bound},
             {"statistic", format_double(out.statistic.log())}});
  json result{{"t", out.t},
              {"d", out.bound},
              {"included", include},
              {"bound_incremented", out.bound_incremented},
              {"log_statistic", format_double(out.statistic.log())},
              {"query_size", guard_state(s->guard).query.size()}};
  if (out.removed_index) result["removed_index"] = *out.removed_index;
  if (out.bound_incremented) {
    json ev{{"kind", "bound_change"}, {"index", out.t}, {"d", out.bound}};
    if (out.removed_index) ev["removed_index"] = *out.removed_index;
    s->record(ev);
  }
  return result;
}

WhatIfResult SessionStore::what_if(const std::string& id, const std::vector<std::size_t>& subset) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  const std::size_t t = s->committed.size();
  std::vector<std::size_t> sorted = subset;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t i : sorted) {
    if (i == 0 || i > t) throw InvalidRequest("subset", "index " + std::to_string(i) + " is not a decided index");
  }
  const ClosureResult r = closure_bound(family_for(s->spec), s->committed, sorted);
  s->record({{"kind", "whatif"}, {"subset", sorted}, {"result", r.bound}});
  return {r.bound, r.minimizer};
}

json SessionStore::trace(const std::string& id, std::uint64_t since) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->trace_json(since);
}

std::string SessionStore::export_csv(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  std::ostringstream os;
  write_trace_csv(os, s->trace);
  return os.str();
}

std::string SessionStore::state_hash(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->hash();
}

std::size_t SessionStore::bound(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return guard_state(s->guard).bound;
}

}  // namespace otd
