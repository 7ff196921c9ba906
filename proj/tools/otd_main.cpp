// otd: simulate, replay, oracle and serve.

#include <csignal>
#include <pthread.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "otd/closure.hpp"
#include "otd/evalues.hpp"
#include "otd/guard.hpp"
#include "otd/http_service.hpp"
#include "otd/manifest.hpp"
#include "otd/session.hpp"
#include "otd/simulation.hpp"
#include "otd/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;
constexpr int kMalformedInput = 3;
constexpr int kOracleCap = 4;
constexpr int kPortBusy = 5;

struct LineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

otd::LogValue evalue_from(const json& line) {
  if (line.contains("log_e")) {
    const auto& v = line["log_e"];
    if (v.is_string()) return otd::LogValue::from_log(otd::parse_double(v.get<std::string>()));
    if (v.is_number()) return otd::LogValue::from_log(v.get<double>());
    throw LineError("log_e must be a decimal string");
  }
  const auto& v = line.at("e");
  const double e = v.is_string() ? otd::parse_double(v.get<std::string>()) : v.get<double>();
  if (!(e >= 0.0)) throw LineError("e must be nonnegative");
  return std::isinf(e) ? otd::LogValue::infinity() : otd::LogValue::from_value(e);
}

otd::GammaWeights parse_gamma(const std::string& text) {
  if (text == "inverse-square") return otd::GammaWeights::inverse_square();
  if (text.rfind("geometric:", 0) == 0) return otd::GammaWeights::geometric(otd::parse_double(text.substr(10)));
  throw std::invalid_argument("gamma must be inverse-square or geometric:q");
}

std::istream* open_input(const std::string& path, std::ifstream& file) {
  if (path == "-") return &std::cin;
  file.open(path);
  if (!file) throw std::invalid_argument("cannot open " + path);
  return &file;
}

// ---------------------------------------------------------------------------

struct SimulateFlags {
  std::size_t n = 0, trials = 0;
  double alpha = 0.0;
  std::vector<double> mu_a, pi_a;
  std::string methods;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::string out = "sim_out";
  std::string config;
  bool full = false;
};

int cmd_simulate(const SimulateFlags& f, CLI::App& sub) {
  otd::SimConfig cfg;
  try {
    if (!f.config.empty()) {
      std::ifstream in(f.config);
      if (!in) throw std::invalid_argument("cannot read config " + f.config);
      json j = json::parse(in);
      if (j.contains("config") && j.contains("seed")) j = j["config"];
      cfg.merge_json(j);
    }
    if (f.full) {
      cfg.n = 1000;
      cfg.trials = 1000;
    }
    if (sub.count("--n")) cfg.n = f.n;
    if (sub.count("--trials")) cfg.trials = f.trials;
    if (sub.count("--alpha")) cfg.alpha = f.alpha;
    if (sub.count("--mu-a")) cfg.mu_a = f.mu_a;
    if (sub.count("--pi-a")) cfg.pi_a = f.pi_a;
    if (sub.count("--seed")) cfg.seed = f.seed;
    if (sub.count("--jobs")) cfg.jobs = f.jobs;
    if (sub.count("--methods")) {
      cfg.methods.clear();
      std::stringstream ss(f.methods);
      for (std::string m; std::getline(ss, m, ',');) {
        if (!m.empty()) cfg.methods.push_back(m);
      }
    }
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "otd simulate: config error: " << e.what() << '\n';
    return kConfigError;
  }

  const otd::GridResult result = otd::run_grid(cfg);
  fs::create_directories(f.out);
  const fs::path csv_path = fs::path(f.out) / "simulation.csv";
  {
    std::ofstream out(csv_path, std::ios::binary);
    otd::write_grid_csv(out, result);
  }
  otd::RunManifest manifest;
  manifest.config = cfg.to_json();
  manifest.config.erase("jobs");
  manifest.seed = cfg.seed;
  manifest.digests["simulation.csv"] = otd::sha256_file_hex(csv_path);
  std::ofstream(fs::path(f.out) / "manifest.json") << manifest.to_json().dump(2) << '\n';
  for (const auto& c : result.cells) {
    std::cerr << c.method << " mu_A=" << c.mu_a << " pi_A=" << c.pi_a
              << " final_tdp_bound=" << c.mean_tdp_bound.back() << " coverage=" << c.coverage() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ReplayFlags {
  std::string file = "-";
  std::string method = "seq-e-guard";
  double alpha = 0.05;
  std::string gamma = "inverse-square";
  double a = 1.0;
  bool admissible = false;
};

template <class Guard>
int replay_with(Guard& guard, const ReplayFlags& f, std::istream& in) {
  const auto params = otd::OnlineSimpleParams::make(f.alpha, f.a);
  std::cout << otd::trace_header() << std::endl;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json line = json::parse(text);
      if (!line.is_object()) throw LineError("expected an object");
      const std::size_t expected = guard.state().t + 1;
      if (line.contains("index") && line["index"].get<std::size_t>() != expected) {
        throw LineError("index " + line["index"].dump() + " out of order (expected " + std::to_string(expected) + ")");
      }
      otd::LogValue e;
      std::optional<bool> query;
      if (line.contains("p")) {
        const double p = line["p"].get<double>();
        if (!(p >= 0.0 && p <= 1.0)) throw LineError("p must lie in [0, 1]");
        const double ai = line.value("alpha_i", f.alpha);
        e = otd::online_simple_evalue(p, ai, params);
        if (f.admissible) e = e / otd::LogValue::from_value(otd::online_simple_slack(ai, params));
        query = p <= ai;
      } else {
        e = evalue_from(line);
      }
      bool include = false;
      if (line.contains("include")) {
        include = line["include"].get<bool>();
      } else {
        const std::string rule = line.value("rule", std::string("query"));
        if (rule == "all") include = true;
        else if (rule == "none") include = false;
        else if (rule == "query" && query) include = *query;
        else if (rule == "query") throw LineError("rule \"query\" needs a p-value");
        else throw LineError("unknown rule '" + rule + "'");
      }
      const otd::StepOutcome out = guard.step(e, include);
      std::cout << otd::trace_line(otd::make_row(out, guard.state().query.size())) << std::endl;
    } catch (const std::exception& ex) {
      std::cerr << "otd replay: line " << lineno << ": " << ex.what() << '\n';
      return kMalformedInput;
    }
  }
  return 0;
}

int cmd_replay(const ReplayFlags& f) {
  std::ifstream file;
  std::istream* in = nullptr;
  try {
    if (!(f.alpha > 0.0 && f.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    in = open_input(f.file, file);
    if (f.method == "seq-e-guard") {
      otd::SeqEGuard g(f.alpha);
      return replay_with(g, f, *in);
    }
    if (f.method == "exe-guard") {
      otd::ExEGuard g(f.alpha);
      return replay_with(g, f, *in);
    }
    if (f.method == "arbe-guard") {
      otd::ArbEGuard g(f.alpha, parse_gamma(f.gamma));
      return replay_with(g, f, *in);
    }
    throw std::invalid_argument("unknown method '" + f.method + "'");
  } catch (const std::exception& e) {
    std::cerr << "otd replay: " << e.what() << '\n';
    return kConfigError;
  }
}

// ---------------------------------------------------------------------------

struct OracleFlags {
  std::string file = "-";
  std::string family = "product";
  double alpha = 0.05;
  std::string gamma = "inverse-square";
  std::string subset;
  bool verbose = false;
};

int cmd_oracle(const OracleFlags& f) {
  otd::IntersectionFamily fam;
  std::vector<otd::LogValue> evalues;
  std::ifstream file;
  try {
    fam.kind = otd::parse_family(f.family);
    fam.alpha = f.alpha;
    if (!(f.alpha > 0.0 && f.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (fam.kind == otd::FamilyKind::weighted) fam.gamma = parse_gamma(f.gamma);
    std::istream* in = open_input(f.file, file);
    std::string text;
    std::size_t lineno = 0;
    while (std::getline(*in, text)) {
      ++lineno;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        evalues.push_back(evalue_from(json::parse(text)));
      } catch (const std::exception& ex) {
        std::cerr << "otd oracle: line " << lineno << ": " << ex.what() << '\n';
        return kMalformedInput;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "otd oracle: " << e.what() << '\n';
    return kConfigError;
  }
  std::vector<std::size_t> subset;
  if (f.subset.empty()) {
    for (std::size_t i = 1; i <= evalues.size(); ++i) subset.push_back(i);
  } else {
    std::stringstream ss(f.subset);
    for (std::string tok; std::getline(ss, tok, ',');) {
      if (tok.empty()) continue;
      try {
        subset.push_back(std::stoul(tok));
      } catch (const std::exception&) {
        std::cerr << "otd oracle: bad subset entry '" << tok << "'\n";
        return kConfigError;
      }
    }
  }
  try {
    const otd::ClosureResult r = otd::closure_bound(fam, evalues, subset);
    std::cout << r.bound << '\n';
    if (f.verbose) {
      std::cout << "minimizer:";
      for (std::size_t i : r.minimizer) std::cout << ' ' << i;
      std::cout << '\n';
    }
  } catch (const otd::OracleCapExceeded& e) {
    std::cerr << "otd oracle: " << e.what() << '\n';
    return kOracleCap;
  } catch (const std::exception& e) {
    std::cerr << "otd oracle: " << e.what() << '\n';
    return kConfigError;
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct ServeFlags {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "otd_data";
  std::string static_dir;
};

int cmd_serve(const ServeFlags& f) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  std::unique_ptr<otd::SessionStore> store;
  try {
    store = std::make_unique<otd::SessionStore>(f.data_dir);
  } catch (const std::exception& e) {
    std::cerr << "otd serve: " << e.what() << '\n';
    return kConfigError;
  }
  std::optional<fs::path> static_dir;
  if (!f.static_dir.empty()) static_dir = f.static_dir;
  otd::HttpService service(*store, static_dir);
  const int port = service.bind(f.host, f.port);
  if (port < 0) {
    std::cerr << "otd serve: cannot bind " << f.host << ':' << f.port << '\n';
    return kPortBusy;
  }
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  std::cerr << "otd serve: listening on " << f.host << ':' << port << '\n';
  service.run();
  // Wake the waiter if the server stopped on its own.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online true discovery guarantees"};
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Run the Gaussian simulation grid");
  simulate->add_option("--n", sim.n, "Hypotheses per trial");
  simulate->add_option("--trials", sim.trials, "Trials per grid cell");
  simulate->add_option("--alpha", sim.alpha, "Level");
  simulate->add_option("--mu-a", sim.mu_a, "Alternative means")->delimiter(',');
  simulate->add_option("--pi-a", sim.pi_a, "Alternative proportions")->delimiter(',');
  simulate->add_option("--methods", sim.methods, "Comma-separated method names");
  simulate->add_option("--seed", sim.seed, "Seed");
  simulate->add_option("--jobs", sim.jobs, "Worker threads");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_option("--config", sim.config, "JSON config or manifest");
  simulate->add_flag("--full", sim.full, "Use n = 1000 and 1000 trials unless --n/--trials are given");

  ReplayFlags rep;
  auto* replay = app.add_subcommand("replay", "Run a guard over an evidence JSONL stream");
  replay->add_option("file", rep.file, "Input file ('-' for stdin)");
  replay->add_option("--method", rep.method, "seq-e-guard | exe-guard | arbe-guard");
  replay->add_option("--alpha", rep.alpha, "Level");
  replay->add_option("--gamma", rep.gamma, "inverse-square | geometric:q");
  replay->add_option("--a", rep.a, "online-simple parameter for p-value lines");
  replay->add_flag("--admissible", rep.admissible, "Divide online-simple e-values by their slack");

  OracleFlags ora;
  auto* oracle = app.add_subcommand("oracle", "Brute-force closed procedure bound");
  oracle->add_option("file", ora.file, "Input file ('-' for stdin)");
  oracle->add_option("--family", ora.family, "product | average | weighted");
  oracle->add_option("--alpha", ora.alpha, "Level");
  oracle->add_option("--gamma", ora.gamma, "inverse-square | geometric:q");
  oracle->add_option("--subset", ora.subset, "Comma-separated one-based indices (default: all)");
  oracle->add_flag("--verbose", ora.verbose, "Also print the minimizing index set");

  ServeFlags srv;
  auto* serve = app.add_subcommand("serve", "Run the session service");
  serve->add_option("--host", srv.host, "Bind address");
  serve->add_option("--port", srv.port, "Port");
  serve->add_option("--data-dir", srv.data_dir, "Session log directory");
  serve->add_option("--static-dir", srv.static_dir, "Directory with the dashboard assets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  if (*simulate) return cmd_simulate(sim, *simulate);
  if (*replay) return cmd_replay(rep);
  if (*oracle) return cmd_oracle(ora);
  if (*serve) return cmd_serve(srv);
  return kConfigError;
}
