#include "otd/evalues.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace otd {

namespace {

void require_level(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(std::string(what) + ": alpha must lie in (0, 1)");
  }
}

constexpr double kRootTol = 1e-8;

}  // namespace

OnlineSimpleParams OnlineSimpleParams::make(double alpha, double a) {
  require_level(alpha, "online-simple");
  if (!(a > 0.0)) throw std::invalid_argument("online-simple: a must be positive");
  const double log_inv = std::log(1.0 / alpha);
  OnlineSimpleParams p;
  p.alpha = alpha;
  p.a = a;
  p.c = log_inv / (a * std::log1p(log_inv / a));
  p.theta_c = log_inv / (p.c * a);
  return p;
}

LogValue online_simple_evalue(double p, double alpha_i, const OnlineSimpleParams& params) {
  const double hit = p <= alpha_i ? 1.0 : 0.0;
  return LogValue::from_log(params.theta_c * (hit - params.c * alpha_i));
}

double online_simple_slack(double alpha_i, const OnlineSimpleParams& params) {
  const double th = params.theta_c;
  const double c = params.c;
  return alpha_i * std::exp(th * (1.0 - c * alpha_i)) + (1.0 - alpha_i) * std::exp(-th * c * alpha_i);
}

OnlineAdaptiveParams OnlineAdaptiveParams::make(double alpha, double a, double B) {
  require_level(alpha, "online-adaptive");
  if (!(a > 0.0)) throw std::invalid_argument("online-adaptive: a must be positive");
  if (!(B > 0.0) || !std::isfinite(B)) {
    throw std::invalid_argument("online-adaptive: B must be positive and finite");
  }
  const double log_inv = std::log(1.0 / alpha);
  OnlineAdaptiveParams p;
  p.alpha = alpha;
  p.a = a;
  p.B = B;
  p.c = log_inv / (a * std::log1p((1.0 - std::pow(alpha, B / a)) / B));
  p.theta_c = log_inv / (p.c * a);
  return p;
}

namespace {

double adaptive_ratio(double alpha_i, double lambda_i, const OnlineAdaptiveParams& params) {
  if (!(lambda_i >= alpha_i && lambda_i < 1.0)) {
    throw std::invalid_argument("online-adaptive: lambda_i must lie in [alpha_i, 1)");
  }
  const double ratio = alpha_i / (1.0 - lambda_i);
  // Small relative slack so that B computed as a max over the same ratios is accepted.
  if (ratio > params.B * (1.0 + 1e-12)) {
    throw std::invalid_argument("online-adaptive: alpha_i / (1 - lambda_i) exceeds B");
  }
  return ratio;
}

}  // namespace

LogValue online_adaptive_evalue(double p, double alpha_i, double lambda_i,
                                const OnlineAdaptiveParams& params) {
  const double ratio = adaptive_ratio(alpha_i, lambda_i, params);
  const double hit = p <= alpha_i ? 1.0 : 0.0;
  const double miss = p > lambda_i ? 1.0 : 0.0;
  return LogValue::from_log(params.theta_c * (hit - params.c * ratio * miss));
}

double online_adaptive_slack(double alpha_i, double lambda_i, const OnlineAdaptiveParams& params) {
  const double ratio = adaptive_ratio(alpha_i, lambda_i, params);
  const double low = std::exp(-params.theta_c * params.c * ratio);
  return std::expm1(params.theta_c) * alpha_i + lambda_i * (1.0 - low) + low;
}

FreedmanParams FreedmanParams::make(double alpha, double a) {
  require_level(alpha, "freedman");
  if (!(a > 0.0)) throw std::invalid_argument("freedman: a must be positive");
  constexpr double pi2 = std::numbers::pi * std::numbers::pi;
  const double j = std::max(2.0 * std::log2(a), 1.0);
  FreedmanParams f;
  f.a = a;
  f.level = alpha * 6.0 / (j * j * (pi2 + 6.0));
  const double log_inv = std::log(1.0 / f.level);
  f.kappa = std::sqrt(2.0 * a * log_inv) + log_inv / 2.0;
  f.lambda = std::log1p(f.kappa / a);
  f.psi = std::expm1(f.lambda) - f.lambda;
  return f;
}

LogValue freedman_evalue(double p, double alpha_i, const FreedmanParams& params) {
  const double hit = p <= alpha_i ? 1.0 : 0.0;
  return LogValue::from_log(params.lambda * (hit - alpha_i) -
                            params.psi * alpha_i * (1.0 - alpha_i));
}

CalibratedEvalue calibrate_lift(double p, double x) {
  if (!(x > 0.0)) throw std::invalid_argument("calibrator: x must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("calibrator: p must lie in [0, 1]");
  if (p == 0.0) return {LogValue::infinity(), true};
  if (p == 1.0) return {LogValue::zero(), true};
  // Phi^{-1}(1 - p) = -Phi^{-1}(p) keeps precision for small p.
  return {LogValue::from_log(-x * std_normal_quantile(p) - 0.5 * x * x), false};
}

LogValue gro_gaussian_evalue(double x_obs, double mu0, double mu1) {
  const double delta = mu1 - mu0;
  if (delta == 0.0) throw std::invalid_argument("gro: mu1 must differ from mu0");
  return LogValue::from_log(delta * (x_obs - mu0) - 0.5 * delta * delta);
}

LogValue soft_rank_evalue(double score, std::span<const double> calib_scores) {
  if (calib_scores.empty()) throw std::invalid_argument("soft-rank: need calibration scores");
  if (score < 0.0) throw std::invalid_argument("soft-rank: scores must be nonnegative");
  long double total = score;
  for (double s : calib_scores) {
    if (s < 0.0) throw std::invalid_argument("soft-rank: scores must be nonnegative");
    total += s;
  }
  if (total == 0.0L || score == 0.0) return LogValue::zero();
  const long double n1 = static_cast<long double>(calib_scores.size() + 1);
  return LogValue::from_log(static_cast<double>(std::log(n1 * score / total)));
}

LogValue hedge(LogValue e, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("hedge: lambda must be in [0, 1]");
  if (lambda == 0.0) return LogValue::one();
  if (lambda == 1.0) return e;
  const std::pair<double, double> terms[] = {{std::log1p(-lambda), 0.0}, {std::log(lambda), e.log()}};
  return log_sum_prod(terms);
}

HedgeSchedule HedgeSchedule::fixed(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("hedge: lambda must be in [0, 1]");
  HedgeSchedule s;
  s.mode = Mode::fixed;
  s.fixed_lambda = lambda;
  return s;
}

double HedgeSchedule::next_lambda() const {
  if (mode == Mode::fixed) return fixed_lambda;
  return (0.5 + static_cast<double>(above_one)) / static_cast<double>(observed + 1);
}

HedgeSchedule tau_hat_update(HedgeSchedule state, LogValue raw_e) {
  ++state.observed;
  if (raw_e > LogValue::one()) ++state.above_one;
  return state;
}

GammaWeights GammaWeights::inverse_square() { return GammaWeights{}; }

GammaWeights GammaWeights::geometric(double q) {
  if (!(q >= 0.0 && q < 1.0)) throw std::invalid_argument("gamma: geometric ratio must be in [0, 1)");
  GammaWeights g;
  g.kind_ = Kind::geometric;
  g.ratio_ = q;
  return g;
}

GammaWeights GammaWeights::explicit_list(std::vector<double> values) {
  long double sum = 0.0L;
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("gamma: weights must be nonnegative");
    sum += v;
  }
  if (sum > 1.0L + 1e-12L) throw std::invalid_argument("gamma: weights must sum to at most 1");
  GammaWeights g;
  g.kind_ = Kind::explicit_list;
  g.values_ = std::move(values);
  return g;
}

double GammaWeights::operator()(std::size_t i) const {
  if (i == 0) throw std::out_of_range("gamma weights are one-based");
  switch (kind_) {
    case Kind::inverse_square: {
      const double di = static_cast<double>(i);
      return 6.0 / (std::numbers::pi * std::numbers::pi * di * di);
    }
    case Kind::geometric:
      return (1.0 - ratio_) * std::pow(ratio_, static_cast<double>(i - 1));
    case Kind::explicit_list:
      return i <= values_.size() ? values_[i - 1] : 0.0;
  }
  return 0.0;
}

bool GammaWeights::nonincreasing() const {
  if (kind_ != Kind::explicit_list) return true;
  return std::is_sorted(values_.rbegin(), values_.rend());
}

LogValue boosting_cutoff(std::span<const LogValue> active, LogValue discards_product, double alpha) {
  require_level(alpha, "boosting");
  LogAccumulator prod;
  prod.add(discards_product);
  LogValue largest = LogValue::zero();
  for (LogValue e : active) {
    prod.add(e);
    largest = std::max(largest, e);
  }
  const LogValue total = prod.total();
  LogValue inverse;
  if (total.is_zero()) {
    inverse = LogValue::infinity();
  } else if (total.is_infinite()) {
    inverse = LogValue::zero();
  } else {
    inverse = LogValue::from_log(-std::log(alpha) - total.log());
  }
  return std::max(largest, inverse);
}

double truncated_lognormal_mean(double delta, double b, double m) {
  const double ell = std::log(m / b);
  return b * std_normal_cdf(ell / delta - delta / 2.0) + m * std_normal_cdf(-(ell / delta + delta / 2.0));
}

double truncated_hedged_lognormal_mean(double delta, double lambda, double b, double m) {
  const double s = (lambda - 1.0 + m / b) / lambda;
  if (!(s > 0.0)) return m;
  const double ls = std::log(s);
  const double z = (ls + delta * delta / 2.0) / delta;
  return m * std_normal_cdf(-z) + b * (1.0 - lambda) * std_normal_cdf(z) +
         b * lambda * std_normal_cdf(z - delta);
}

double boost_factor_lognormal(double delta, double m) {
  if (!(delta > 0.0)) throw std::invalid_argument("boost: delta must be positive");
  if (std::isnan(m)) throw std::invalid_argument("boost: m is NaN");
  if (!(m > 1.0) || std::isinf(m)) return 1.0;
  auto f = [&](double b) { return truncated_lognormal_mean(delta, b, m) - 1.0; };
  if (f(1.0) >= 0.0) return 1.0;
  double hi = 2.0;
  while (f(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e300) return 1.0;
  }
  return std::max(1.0, solve_increasing_root(f, std::max(1.0, hi / 2.0), hi, kRootTol));
}

double boost_factor_hedged_lognormal(double delta, double lambda, double m) {
  if (!(delta > 0.0)) throw std::invalid_argument("boost: delta must be positive");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("boost: lambda must be in [0, 1]");
  if (lambda == 1.0) return boost_factor_lognormal(delta, m);
  if (lambda == 0.0 || !(m > 1.0) || std::isinf(m)) return 1.0;
  auto f = [&](double b) { return truncated_hedged_lognormal_mean(delta, lambda, b, m) - 1.0; };
  if (f(1.0) >= 0.0) return 1.0;
  const double hi = 1.0 / (1.0 - lambda);
  if (f(hi) < 0.0) return hi;
  return std::max(1.0, solve_increasing_root(f, 1.0, hi, kRootTol));
}

}  // namespace otd
