#pragma once

// Gaussian simulation harness.
//
// Each trial draws n independent hypotheses: with probability pi_A the
// alternative X ~ N(mu_A, 1), otherwise the null X ~ N(0, 1). P = Phi(-X).
// The query path is S_t = {i <= t : P_i <= alpha} for every method.

#include <array>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

namespace otd {

/// xoshiro256** with splitmix64 seeding; satisfies UniformRandomBitGenerator.
class Xoshiro256ss {
 public:
  using result_type = std::uint64_t;

  explicit Xoshiro256ss(std::uint64_t seed);
  /// Raw state, for checking against reference outputs.
  static Xoshiro256ss from_state(const std::array<std::uint64_t, 4>& state);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()();

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed of the substream for one trial.
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial);

struct SimConfig {
  std::size_t n = 200;
  std::size_t trials = 500;
  double alpha = 0.1;
  std::vector<double> mu_a = {2.0, 3.0, 4.0};
  std::vector<double> pi_a = {0.1, 0.3, 0.5};
  std::vector<std::string> methods = {"admissible-os", "boosted-gro", "calibrated"};
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  double os_a = 3.0;          ///< parameter a of the online-simple family
  double calibrator_x = 0.1;  ///< parameter x of the calibrator
  double lambda = 0.5;        ///< constant lambda_i of the adaptive family

  /// Throws std::invalid_argument with a message naming the offending field.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their current values; unknown keys are rejected.
  void merge_json(const nlohmann::json& j);
};

/// Method names accepted by the harness: every p-value procedure name plus
/// gro, hedged-gro, boosted-gro, calibrated and calibrated-unboosted.
std::vector<std::string> simulation_methods();
bool is_simulation_method(const std::string& name);

struct CellResult {
  std::string method;
  double mu_a = 0.0;
  double pi_a = 0.0;
  std::vector<double> mean_tdp_bound;  ///< per t = 1..n
  std::vector<double> true_tdp;        ///< per t = 1..n
  std::size_t violations = 0;          ///< trials with d_t > |S_t cap I_1| for some t
  std::size_t trials = 0;

  double coverage() const {
    return trials == 0 ? 1.0 : 1.0 - static_cast<double>(violations) / static_cast<double>(trials);
  }
};

struct GridResult {
  std::vector<CellResult> cells;  ///< ordered by (mu_a, pi_a, method) as configured

  const CellResult& cell(const std::string& method, double mu_a, double pi_a) const;
};

/// Runs every (mu_a, pi_a, method) cell. Output is independent of cfg.jobs.
GridResult run_grid(const SimConfig& cfg);

/// Header "method,mu_A,pi_A,t,mean_tdp_bound,true_tdp,coverage", then one row per (cell, t).
void write_grid_csv(std::ostream& os, const GridResult& result);

/// Mean over trials of the hedging weight tau_hat_i, i = 1..n, for the GRO
/// e-values of the given design.
std::vector<double> tau_hat_trace(double mu_a, double pi_a, std::size_t n, std::size_t trials,
                                  std::uint64_t seed);

}  // namespace otd
