#pragma once

// Bound procedures for streams of p-values with individual significance
// levels alpha_i. The query set is always S_t = {i <= t : p_i <= alpha_i}.
//
// The closed / admissible / mixture procedures run through the guards; the
// baselines evaluate their published ceil/floor formulas directly.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otd/trace.hpp"

namespace otd {

struct PStep {
  double p = 1.0;
  double alpha_i = 0.0;
  double lambda_i = 0.5;  ///< only read by the adaptive procedures
};

enum class PMethod {
  online_simple,        ///< baseline ceil(-ca + sum(1{p<=alpha_i} - c alpha_i))
  closed_os,            ///< SeqE-Guard on online-simple e-values
  admissible_os,        ///< same with e-values divided by u_i
  online_adaptive,      ///< baseline with the three-valued adaptive term
  closed_adaptive,      ///< SeqE-Guard on online-adaptive e-values
  admissible_adaptive,  ///< same with slack correction
  u_os,                 ///< max over a = 1..a_max of the online-simple baseline at level alpha(a)
  m_os,                 ///< mixture of online-simple martingales
  u_freedman,           ///< union of gated Freedman bounds over a = 2^{j/2}
  m_freedman,           ///< mixture of Freedman martingales
};

std::string_view to_string(PMethod m);
std::optional<PMethod> parse_pmethod(std::string_view name);

struct PStreamConfig {
  PMethod method = PMethod::closed_os;
  double alpha = 0.1;
  double a = 1.0;             ///< online-simple / adaptive parameter
  double B = 1.0;             ///< sup alpha_i / (1 - lambda_i) for the adaptive family
  std::size_t a_max = 100;    ///< grid a = 1..a_max for u-os / m-os
  std::size_t j_max = 40;     ///< grid a = 2^{j/2}, j = 0..j_max for the Freedman methods

  /// Throws std::invalid_argument on inconsistent parameters.
  void validate() const;
};

/// Online procedure consuming one (p, alpha_i[, lambda_i]) at a time.
///
/// For guard-based methods the row's log_statistic is the log of the guard
/// statistic; baselines report the score inside their ceil/floor instead.
class PStreamProcedure {
 public:
  virtual ~PStreamProcedure() = default;
  virtual TraceRow push(const PStep& step) = 0;
  virtual std::size_t bound() const = 0;
};

std::unique_ptr<PStreamProcedure> make_pstream(const PStreamConfig& cfg);

BoundTrace run_pstream(const PStreamConfig& cfg, std::span<const PStep> steps);

/// Closed online-simple written as the plain sum recursion over
/// {1..t} \ A^c, checked at every step. Used to cross-check the guard route.
BoundTrace closed_online_simple_sum_form(std::span<const PStep> steps, double alpha, double a);

/// Log weights and parameter grids of the mixture methods.
std::vector<double> m_os_log_weights(std::size_t a_max);
std::vector<double> freedman_grid(std::size_t j_max);
std::vector<double> m_freedman_log_weights(std::size_t j_max);

}  // namespace otd
