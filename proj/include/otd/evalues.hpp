#pragma once

// Constructors for the e-value families used by the guards, plus the
// transforms applied on top of them (slack correction, hedging, boosting).

#include <cstddef>
#include <span>
#include <vector>

#include "otd/numerics.hpp"

namespace otd {

// ---------------------------------------------------------------------------
// Binary e-values derived from thresholded p-values.

/// Constants of the online-simple e-value exp[theta_c (1{p <= alpha_i} - c alpha_i)].
struct OnlineSimpleParams {
  double alpha = 0.1;
  double a = 1.0;
  double c = 0.0;
  double theta_c = 0.0;

  /// c = log(1/alpha) / (a log(1 + log(1/alpha)/a)), theta_c = log(1/alpha)/(c a).
  static OnlineSimpleParams make(double alpha, double a);
};

LogValue online_simple_evalue(double p, double alpha_i, const OnlineSimpleParams& params);

/// Null expectation bound u_i of the online-simple e-value. Dividing the e-value
/// by u_i makes its expectation exactly one under a uniform p-value.
double online_simple_slack(double alpha_i, const OnlineSimpleParams& params);

/// Constants of the three-valued online-adaptive e-value.
struct OnlineAdaptiveParams {
  double alpha = 0.1;
  double a = 1.0;
  double B = 1.0;  ///< sup_i alpha_i / (1 - lambda_i)
  double c = 0.0;
  double theta_c = 0.0;

  /// c = log(1/alpha) / (a log(1 + (1 - alpha^{B/a}) / B)).
  static OnlineAdaptiveParams make(double alpha, double a, double B);
};

/// exp[theta_c (1{p <= alpha_i} - c alpha_i/(1-lambda_i) 1{p > lambda_i})].
/// Throws std::invalid_argument unless alpha_i <= lambda_i < 1 and the ratio is at most B.
LogValue online_adaptive_evalue(double p, double alpha_i, double lambda_i,
                                const OnlineAdaptiveParams& params);

double online_adaptive_slack(double alpha_i, double lambda_i, const OnlineAdaptiveParams& params);

/// Constants of the Freedman-type e-value for variance budget a.
struct FreedmanParams {
  double a = 1.0;
  double level = 0.0;   ///< alpha(a) = alpha * 6 / (max(2 log2 a, 1)^2 (pi^2 + 6))
  double kappa = 0.0;   ///< sqrt(2 a log(1/level)) + log(1/level) / 2
  double lambda = 0.0;  ///< log(1 + kappa / a)
  double psi = 0.0;     ///< exp(lambda) - lambda - 1

  static FreedmanParams make(double alpha, double a);
};

/// exp(lambda (1{p <= alpha_i} - alpha_i) - psi alpha_i (1 - alpha_i)).
LogValue freedman_evalue(double p, double alpha_i, const FreedmanParams& params);

// ---------------------------------------------------------------------------
// Continuous e-values.

struct CalibratedEvalue {
  LogValue e;
  bool saturated = false;  ///< p was 0 or 1; the e-value is +inf or 0.
};

/// h_x(p) = exp(x Phi^{-1}(1 - p) - x^2 / 2).
CalibratedEvalue calibrate_lift(double p, double x);

/// Gaussian likelihood ratio of N(mu1, 1) against N(mu0, 1) at x_obs.
LogValue gro_gaussian_evalue(double x_obs, double mu0, double mu1);

/// (n + 1) s / (s + sum of calibration scores); 0/0 is taken as 0.
LogValue soft_rank_evalue(double score, std::span<const double> calib_scores);

// ---------------------------------------------------------------------------
// Hedging.

/// log(1 - lambda + lambda e).
LogValue hedge(LogValue e, double lambda);

/// Predictable hedging weights: either a fixed lambda or the running estimate
/// tau_i = (1/2 + #{j < i : E_j > 1}) / i of the alternative proportion.
struct HedgeSchedule {
  enum class Mode { fixed, adaptive };

  Mode mode = Mode::adaptive;
  double fixed_lambda = 1.0;
  std::size_t observed = 0;       ///< number of raw e-values seen so far
  std::size_t above_one = 0;      ///< how many of them exceeded 1

  static HedgeSchedule adaptive() { return {}; }
  static HedgeSchedule fixed(double lambda);

  /// Weight for the next (not yet observed) e-value.
  double next_lambda() const;
};

/// Records one raw e-value; returns the updated schedule.
HedgeSchedule tau_hat_update(HedgeSchedule state, LogValue raw_e);

// ---------------------------------------------------------------------------
// Weight sequences for the weighted-average intersection tests.

class GammaWeights {
 public:
  enum class Kind { inverse_square, geometric, explicit_list };

  /// gamma_i = 6 / (pi^2 i^2).
  static GammaWeights inverse_square();
  /// gamma_i = (1 - q) q^{i-1}.
  static GammaWeights geometric(double q);
  /// Given values for i = 1..k, zero afterwards. Must be nonnegative with sum <= 1.
  static GammaWeights explicit_list(std::vector<double> values);

  /// One-based.
  double operator()(std::size_t i) const;
  bool nonincreasing() const;
  Kind kind() const { return kind_; }
  double ratio() const { return ratio_; }
  const std::vector<double>& values() const { return values_; }

 private:
  Kind kind_ = Kind::inverse_square;
  double ratio_ = 0.0;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Boosting.

/// m_t = max{ max_{i in A} E_i, 1 / (alpha prod_{A cup U} E_i) }.
LogValue boosting_cutoff(std::span<const LogValue> active, LogValue discards_product, double alpha);

/// Largest b >= 1 with E[min(b E, m)] = 1 for a null log-normal(-delta^2/2, delta) E.
double boost_factor_lognormal(double delta, double m);

/// Same for the hedged e-value 1 - lambda + lambda E; result lies in [1, 1/(1-lambda)).
double boost_factor_hedged_lognormal(double delta, double lambda, double m);

/// E[min(b E, m)] for the null log-normal e-value; exposed for tests.
double truncated_lognormal_mean(double delta, double b, double m);
double truncated_hedged_lognormal_mean(double delta, double lambda, double b, double m);

}  // namespace otd
