#include "otd/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <thread>

#include "otd/evalues.hpp"
#include "otd/guard.hpp"
#include "otd/numerics.hpp"
#include "otd/shortcuts.hpp"

namespace otd {

namespace {

constexpr std::size_t kBlock = 50;

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

const std::vector<std::string> kEvalueMethods = {"gro", "hedged-gro", "boosted-gro", "calibrated",
                                                 "calibrated-unboosted"};

struct TrialData {
  std::vector<double> x;
  std::vector<double> p;
  std::vector<char> alt;
};

TrialData draw_trial(double mu_a, double pi_a, std::size_t n, std::uint64_t seed) {
  Xoshiro256ss rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  TrialData d;
  d.x.resize(n);
  d.p.resize(n);
  d.alt.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.alt[i] = unif(rng) < pi_a ? 1 : 0;
    d.x[i] = gauss(rng) + (d.alt[i] ? mu_a : 0.0);
    d.p[i] = std_normal_cdf(-d.x[i]);
  }
  return d;
}

// Bound path d_1..d_n of one method on one trial.
void run_method(const std::string& method, const TrialData& data, const SimConfig& cfg, double mu_a,
                std::vector<std::size_t>& d) {
  const std::size_t n = data.x.size();
  d.assign(n, 0);
  if (auto pm = parse_pmethod(method)) {
    PStreamConfig pc;
    pc.method = *pm;
    pc.alpha = cfg.alpha;
    pc.a = cfg.os_a;
    pc.B = cfg.alpha / (1.0 - cfg.lambda);
    auto proc = make_pstream(pc);
    for (std::size_t i = 0; i < n; ++i) d[i] = proc->push({data.p[i], cfg.alpha, cfg.lambda}).d;
    return;
  }
  SeqEGuard guard(cfg.alpha);
  HedgeSchedule schedule = HedgeSchedule::adaptive();
  for (std::size_t i = 0; i < n; ++i) {
    const bool include = data.p[i] <= cfg.alpha;
    LogValue e;
    if (method == "gro") {
      e = gro_gaussian_evalue(data.x[i], 0.0, mu_a);
    } else if (method == "hedged-gro" || method == "boosted-gro") {
      const LogValue raw = gro_gaussian_evalue(data.x[i], 0.0, mu_a);
      const double lambda = schedule.next_lambda();
      e = hedge(raw, lambda);
      if (method == "boosted-gro") {
        const double m = guard.boosting_cutoff().value();
        e *= LogValue::from_value(boost_factor_hedged_lognormal(mu_a, lambda, m));
      }
      schedule = tau_hat_update(schedule, raw);
    } else {
      e = calibrate_lift(data.p[i], cfg.calibrator_x).e;
      if (method == "calibrated") {
        const double m = guard.boosting_cutoff().value();
        e *= LogValue::from_value(boost_factor_lognormal(cfg.calibrator_x, m));
      }
    }
    d[i] = guard.step(e, include).bound;
  }
}

struct BlockSums {
  std::vector<std::vector<double>> tdp;  // [method][t]
  std::vector<double> truth;             // [t]
  std::vector<std::size_t> violations;   // [method]
};

BlockSums run_block(const SimConfig& cfg, double mu_a, double pi_a, std::uint64_t cell_seed, std::size_t first,
                    std::size_t last) {
  const std::size_t n = cfg.n;
  BlockSums sums;
  sums.tdp.assign(cfg.methods.size(), std::vector<double>(n, 0.0));
  sums.truth.assign(n, 0.0);
  sums.violations.assign(cfg.methods.size(), 0);
  std::vector<std::size_t> query(n), hits(n), d;
  for (std::size_t trial = first; trial < last; ++trial) {
    const TrialData data = draw_trial(mu_a, pi_a, n, trial_seed(cell_seed, trial));
    std::size_t q = 0, h = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (data.p[i] <= cfg.alpha) {
        ++q;
        if (data.alt[i]) ++h;
      }
      query[i] = q;
      hits[i] = h;
      if (q > 0) sums.truth[i] += static_cast<double>(h) / static_cast<double>(q);
    }
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      run_method(cfg.methods[m], data, cfg, mu_a, d);
      bool violated = false;
      for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > hits[i]) violated = true;
        if (query[i] > 0) sums.tdp[m][i] += static_cast<double>(d[i]) / static_cast<double>(query[i]);
      }
      if (violated) ++sums.violations[m];
    }
  }
  return sums;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) { return splitmix64(seed ^ splitmix64(trial)); }

Xoshiro256ss::Xoshiro256ss(std::uint64_t seed) {
  // Consecutive outputs of a splitmix64 generator started at `seed`.
  for (auto& s : s_) {
    s = splitmix64(seed);
    seed += 0x9E3779B97F4A7C15ULL;
  }
}

Xoshiro256ss Xoshiro256ss::from_state(const std::array<std::uint64_t, 4>& state) {
  Xoshiro256ss g(0);
  std::copy(state.begin(), state.end(), g.s_);
  return g;
}

Xoshiro256ss::result_type Xoshiro256ss::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::vector<std::string> simulation_methods() {
  std::vector<std::string> names;
  for (const char* m : {"online-simple", "closed-os", "admissible-os", "online-adaptive", "closed-adaptive",
                        "admissible-adaptive", "u-os", "m-os", "u-freedman", "m-freedman"}) {
    names.emplace_back(m);
  }
  names.insert(names.end(), kEvalueMethods.begin(), kEvalueMethods.end());
  return names;
}

bool is_simulation_method(const std::string& name) {
  const auto all = simulation_methods();
  return std::find(all.begin(), all.end(), name) != all.end();
}

void SimConfig::validate() const {
  if (n == 0) throw std::invalid_argument("n: must be at least 1");
  if (trials == 0) throw std::invalid_argument("trials: must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha: must lie in (0, 1)");
  if (mu_a.empty()) throw std::invalid_argument("mu_a: need at least one value");
  for (double m : mu_a) {
    if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("mu_a: values must be positive");
  }
  if (pi_a.empty()) throw std::invalid_argument("pi_a: need at least one value");
  for (double p : pi_a) {
    if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("pi_a: values must lie in [0, 1)");
  }
  if (methods.empty()) throw std::invalid_argument("methods: need at least one method");
  for (const auto& m : methods) {
    if (!is_simulation_method(m)) throw std::invalid_argument("methods: unknown method '" + m + "'");
  }
  if (jobs == 0) throw std::invalid_argument("jobs: must be at least 1");
  if (!(os_a > 0.0)) throw std::invalid_argument("os_a: must be positive");
  if (!(calibrator_x > 0.0)) throw std::invalid_argument("calibrator_x: must be positive");
  if (!(lambda >= alpha && lambda < 1.0)) throw std::invalid_argument("lambda: must lie in [alpha, 1)");
}

nlohmann::json SimConfig::to_json() const {
  return {{"n", n},          {"trials", trials},       {"alpha", alpha},
          {"mu_a", mu_a},    {"pi_a", pi_a},           {"methods", methods},
          {"seed", seed},    {"jobs", jobs},           {"os_a", os_a},
          {"calibrator_x", calibrator_x}, {"lambda", lambda}};
}

void SimConfig::merge_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n") n = value.get<std::size_t>();
      else if (key == "trials") trials = value.get<std::size_t>();
      else if (key == "alpha") alpha = value.get<double>();
      else if (key == "mu_a") mu_a = value.get<std::vector<double>>();
      else if (key == "pi_a") pi_a = value.get<std::vector<double>>();
      else if (key == "methods") methods = value.get<std::vector<std::string>>();
      else if (key == "seed") seed = value.get<std::uint64_t>();
      else if (key == "jobs") jobs = value.get<unsigned>();
      else if (key == "os_a") os_a = value.get<double>();
      else if (key == "calibrator_x") calibrator_x = value.get<double>();
      else if (key == "lambda") lambda = value.get<double>();
      else throw std::invalid_argument("config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("config: bad value for '" + key + "': " + e.what());
    }
  }
}

const CellResult& GridResult::cell(const std::string& method, double mu_a, double pi_a) const {
  for (const auto& c : cells) {
    if (c.method == method && c.mu_a == mu_a && c.pi_a == pi_a) return c;
  }
  throw std::out_of_range("no such simulation cell: " + method);
}

GridResult run_grid(const SimConfig& cfg) {
  cfg.validate();
  GridResult result;
  std::uint64_t cell_index = 0;
  for (double mu : cfg.mu_a) {
    for (double pi : cfg.pi_a) {
      const std::uint64_t cell_seed = splitmix64(cfg.seed + 0x632BE59BD9B4E019ULL * ++cell_index);
      const std::size_t blocks = (cfg.trials + kBlock - 1) / kBlock;
      std::vector<BlockSums> partial(blocks);
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t b = next++; b < blocks; b = next++) {
          partial[b] = run_block(cfg, mu, pi, cell_seed, b * kBlock, std::min(cfg.trials, (b + 1) * kBlock));
        }
      };
      const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(cfg.jobs, blocks));
      if (threads <= 1) {
        worker();
      } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
      }
      const double scale = 1.0 / static_cast<double>(cfg.trials);
      for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        CellResult cell;
        cell.method = cfg.methods[m];
        cell.mu_a = mu;
        cell.pi_a = pi;
        cell.trials = cfg.trials;
        cell.mean_tdp_bound.assign(cfg.n, 0.0);
        cell.true_tdp.assign(cfg.n, 0.0);
        for (const auto& block : partial) {
          for (std::size_t i = 0; i < cfg.n; ++i) {
            cell.mean_tdp_bound[i] += block.tdp[m][i];
            cell.true_tdp[i] += block.truth[i];
          }
          cell.violations += block.violations[m];
        }
        for (std::size_t i = 0; i < cfg.n; ++i) {
          cell.mean_tdp_bound[i] *= scale;
          cell.true_tdp[i] *= scale;
        }
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

void write_grid_csv(std::ostream& os, const GridResult& result) {
  os << "method,mu_A,pi_A,t,mean_tdp_bound,true_tdp,coverage\n";
  for (const auto& c : result.cells) {
    const std::string prefix = c.method + "," + format_double(c.mu_a) + "," + format_double(c.pi_a) + ",";
    const std::string cov = format_double(c.coverage());
    for (std::size_t i = 0; i < c.mean_tdp_bound.size(); ++i) {
      os << prefix << (i + 1) << ',' << format_double(c.mean_tdp_bound[i]) << ',' << format_double(c.true_tdp[i])
         << ',' << cov << '\n';
    }
  }
}

std::vector<double> tau_hat_trace(double mu_a, double pi_a, std::size_t n, std::size_t trials, std::uint64_t seed) {
  if (n == 0 || trials == 0) throw std::invalid_argument("tau_hat_trace: n and trials must be positive");
  std::vector<double> mean(n, 0.0);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const TrialData data = draw_trial(mu_a, pi_a, n, trial_seed(seed, trial));
    HedgeSchedule schedule = HedgeSchedule::adaptive();
    for (std::size_t i = 0; i < n; ++i) {
      mean[i] += schedule.next_lambda();
      schedule = tau_hat_update(schedule, gro_gaussian_evalue(data.x[i], 0.0, mu_a));
    }
  }
  for (double& v : mean) v /= static_cast<double>(trials);
  return mean;
}

}  // namespace otd
