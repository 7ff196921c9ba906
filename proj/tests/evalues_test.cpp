#include "otd/evalues.hpp"

#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace {

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

template <class Draw>
Moments monte_carlo(std::size_t reps, Draw&& draw) {
  long double sum = 0.0L, sq = 0.0L;
  for (std::size_t i = 0; i < reps; ++i) {
    const long double v = draw();
    sum += v;
    sq += v * v;
  }
  const long double mean = sum / reps;
  const long double var = (sq / reps - mean * mean) * reps / (reps - 1);
  return {static_cast<double>(mean), static_cast<double>(std::sqrt(var / reps))};
}

}  // namespace

TEST(OnlineSimple, EvalueExamples) {
  const auto p = otd::OnlineSimpleParams::make(0.1, 1.0);
  EXPECT_NEAR(otd::online_simple_evalue(0.05, 0.1, p).value(), 2.6234, 1e-3);
  EXPECT_EQ(otd::online_simple_evalue(0.3, 0.0, p).value(), 1.0);
}

TEST(OnlineSimple, ThetaIdentity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ua(0.001, 0.5), uA(0.1, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const double alpha = ua(rng), a = uA(rng);
    const auto p = otd::OnlineSimpleParams::make(alpha, a);
    EXPECT_NEAR(p.theta_c, std::log1p(std::log(1.0 / alpha) / a), 1e-12);
  }
}

TEST(OnlineSimple, ProductCrossingMatchesSumCondition) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0), ua(0.0, 0.3);
  const auto params = otd::OnlineSimpleParams::make(0.1, 3.0);
  for (int rep = 0; rep < 500; ++rep) {
    otd::LogAccumulator prod;
    double sum = 0.0;
    for (int i = 0; i < 30; ++i) {
      const double p = u(rng), ai = ua(rng);
      prod.add(otd::online_simple_evalue(p, ai, params));
      sum += (p <= ai ? 1.0 : 0.0) - params.c * ai;
      const double margin = sum - params.c * params.a;
      if (std::fabs(margin) > 1e-9) {
        EXPECT_EQ(prod.total().log() >= std::log(1.0 / 0.1), margin >= 0.0);
      }
    }
  }
}

TEST(OnlineSimple, SlackGoldenValues) {
  EXPECT_NEAR(otd::online_simple_slack(0.1, otd::OnlineSimpleParams::make(0.1, 1.0)), 0.977, 5e-4);
  EXPECT_NEAR(otd::online_simple_slack(0.1, otd::OnlineSimpleParams::make(0.1, 3.0)), 0.997, 5e-4);
  EXPECT_EQ(otd::online_simple_slack(0.0, otd::OnlineSimpleParams::make(0.1, 1.0)), 1.0);
}

TEST(OnlineSimple, AdmissibleHasUnitMean) {
  for (double a : {0.5, 1.0, 3.0, 10.0}) {
    const auto params = otd::OnlineSimpleParams::make(0.1, a);
    for (double ai : {0.01, 0.05, 0.1, 0.3}) {
      const double u = otd::online_simple_slack(ai, params);
      const double hi = otd::online_simple_evalue(0.0, ai, params).value() / u;
      const double lo = otd::online_simple_evalue(1.0, ai, params).value() / u;
      EXPECT_NEAR(ai * hi + (1.0 - ai) * lo, 1.0, 1e-14);
    }
  }
}

TEST(OnlineAdaptive, SlackGoldenValues) {
  EXPECT_NEAR(otd::online_adaptive_slack(0.1, 0.5, otd::OnlineAdaptiveParams::make(0.1, 1.0, 0.4)), 0.966, 5e-4);
  EXPECT_NEAR(otd::online_adaptive_slack(0.1, 0.5, otd::OnlineAdaptiveParams::make(0.1, 1.0, 0.2)), 1.0, 1e-12);
}

TEST(OnlineAdaptive, ThreeValues) {
  const auto params = otd::OnlineAdaptiveParams::make(0.1, 1.0, 0.4);
  EXPECT_EQ(otd::online_adaptive_evalue(0.3, 0.1, 0.5, params).value(), 1.0);
  EXPECT_GT(otd::online_adaptive_evalue(0.05, 0.1, 0.5, params).value(), 1.0);
  EXPECT_LT(otd::online_adaptive_evalue(0.7, 0.1, 0.5, params).value(), 1.0);
}

TEST(OnlineAdaptive, RejectsInvalidLambda) {
  const auto params = otd::OnlineAdaptiveParams::make(0.1, 1.0, 0.4);
  EXPECT_THROW(otd::online_adaptive_evalue(0.3, 0.1, 0.05, params), std::invalid_argument);
  EXPECT_THROW(otd::online_adaptive_evalue(0.3, 0.1, 1.0, params), std::invalid_argument);
  EXPECT_THROW(otd::online_adaptive_evalue(0.3, 0.3, 0.5, params), std::invalid_argument);
  EXPECT_THROW(otd::online_adaptive_slack(0.3, 0.5, params), std::invalid_argument);
}

TEST(OnlineAdaptive, NullMeanBoundedBySlack) {
  const auto params = otd::OnlineAdaptiveParams::make(0.1, 1.0, 0.4);
  for (double lam : {0.1, 0.5, 0.75}) {
    const double ai = std::min(0.1, 0.4 * (1.0 - lam));
    const double hit = otd::online_adaptive_evalue(0.0, ai, lam, params).value();
    const double mid = 1.0;
    const double low = otd::online_adaptive_evalue(1.0, ai, lam, params).value();
    const double mean = ai * hit + (lam - ai) * mid + (1.0 - lam) * low;
    EXPECT_LE(mean, otd::online_adaptive_slack(ai, lam, params) + 1e-12);
    EXPECT_LE(mean, 1.0 + 1e-12);
  }
}

TEST(Calibrator, Examples) {
  for (double x : {0.1, 1.0}) {
    EXPECT_NEAR(otd::calibrate_lift(0.5, x).e.log(), -x * x / 2.0, 1e-15);
  }
  EXPECT_NEAR(otd::calibrate_lift(0.025, 0.1).e.log(), 0.1 * 1.959963984540054 - 0.005, 1e-12);
  const auto zero = otd::calibrate_lift(0.0, 0.1);
  EXPECT_TRUE(zero.saturated);
  EXPECT_TRUE(zero.e.is_infinite());
  const auto one = otd::calibrate_lift(1.0, 0.1);
  EXPECT_TRUE(one.saturated);
  EXPECT_TRUE(one.e.is_zero());
  EXPECT_THROW(otd::calibrate_lift(0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(otd::calibrate_lift(1.5, 0.1), std::domain_error);
}

TEST(Calibrator, UnitIntegral) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  for (double x : {0.05, 0.1, 0.5, 1.0}) {
    const double v = integrator.integrate([x](double p) { return otd::calibrate_lift(p, x).e.value(); }, 0.0, 1.0);
    EXPECT_NEAR(v, 1.0, 1e-6) << x;
  }
}

TEST(Gro, Examples) {
  EXPECT_NEAR(otd::gro_gaussian_evalue(1.5, 0.0, 3.0).log(), 0.0, 1e-15);
  EXPECT_NEAR(otd::gro_gaussian_evalue(0.0, 0.0, 3.0).log(), -4.5, 1e-15);
  EXPECT_THROW(otd::gro_gaussian_evalue(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST(Gro, NullMeanMonteCarlo) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> z(0.0, 1.0);
  const auto m = monte_carlo(1000000, [&] { return otd::gro_gaussian_evalue(z(rng), 0.0, 1.0).value(); });
  EXPECT_NEAR(m.mean, 1.0, 3.0 * m.se);
}

TEST(Freedman, Parameters) {
  const auto f = otd::FreedmanParams::make(0.1, 1.0);
  const double level = 0.1 * 6.0 / (kPi2 + 6.0);
  EXPECT_NEAR(f.level, level, 1e-15);
  const double l = std::log(1.0 / level);
  EXPECT_NEAR(f.kappa, std::sqrt(2.0 * l) + l / 2.0, 1e-12);
  EXPECT_NEAR(f.lambda, std::log(1.0 + f.kappa), 1e-12);
  EXPECT_NEAR(f.psi, std::exp(f.lambda) - f.lambda - 1.0, 1e-12);
  EXPECT_EQ(otd::freedman_evalue(0.4, 0.0, f).value(), 1.0);
  EXPECT_NEAR(otd::FreedmanParams::make(0.1, 4.0).level, 0.1 * 6.0 / (16.0 * (kPi2 + 6.0)), 1e-15);
}

TEST(Freedman, NullMeanMonteCarlo) {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double a : {1.0, 8.0}) {
    const auto f = otd::FreedmanParams::make(0.1, a);
    const auto m = monte_carlo(1000000, [&] { return otd::freedman_evalue(u(rng), 0.1, f).value(); });
    EXPECT_LE(m.mean, 1.0 + 3.0 * m.se);
  }
}

TEST(OnlineSimple, NullMeanMonteCarlo) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto params = otd::OnlineSimpleParams::make(0.1, 1.0);
  const auto m = monte_carlo(200000, [&] { return otd::online_simple_evalue(u(rng), 0.1, params).value(); });
  EXPECT_LE(m.mean, 1.0 + 3.0 * m.se);
}

TEST(Calibrator, NullMeanMonteCarlo) {
  std::mt19937_64 rng(24);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto m = monte_carlo(200000, [&] { return otd::calibrate_lift(u(rng), 0.5).e.value(); });
  EXPECT_LE(m.mean, 1.0 + 3.0 * m.se);
}

TEST(SoftRank, Examples) {
  const std::vector<double> ones{1.0, 1.0, 1.0};
  EXPECT_NEAR(otd::soft_rank_evalue(1.0, ones).value(), 1.0, 1e-15);
  EXPECT_TRUE(otd::soft_rank_evalue(0.0, ones).is_zero());
  EXPECT_NEAR(otd::soft_rank_evalue(2.0, ones).value(), 1.6, 1e-15);
  const std::vector<double> zeros{0.0, 0.0};
  EXPECT_TRUE(otd::soft_rank_evalue(0.0, zeros).is_zero());
  EXPECT_THROW(otd::soft_rank_evalue(1.0, {}), std::invalid_argument);
}

TEST(SoftRank, ExchangeableNullMean) {
  std::mt19937_64 rng(25);
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> calib(9);
  const auto m = monte_carlo(200000, [&] {
    for (double& c : calib) c = ex(rng);
    return otd::soft_rank_evalue(ex(rng), calib).value();
  });
  EXPECT_NEAR(m.mean, 1.0, 3.0 * m.se);
}

TEST(Hedge, Examples) {
  const auto e = otd::LogValue::from_value(3.0);
  EXPECT_EQ(otd::hedge(e, 0.0), otd::LogValue::one());
  EXPECT_EQ(otd::hedge(e, 1.0), e);
  EXPECT_NEAR(otd::hedge(e, 0.5).value(), 2.0, 1e-15);
  EXPECT_NEAR(otd::hedge(otd::LogValue::zero(), 0.3).value(), 0.7, 1e-15);
  EXPECT_TRUE(otd::hedge(otd::LogValue::infinity(), 0.3).is_infinite());
  EXPECT_THROW(otd::hedge(e, 1.5), std::invalid_argument);
}

TEST(Hedge, BinaryNullMeanPreserved) {
  const auto params = otd::OnlineSimpleParams::make(0.1, 1.0);
  const double u = otd::online_simple_slack(0.1, params);
  for (double lam : {0.0, 0.2, 0.7, 1.0}) {
    const double hi = otd::hedge(otd::online_simple_evalue(0.0, 0.1, params) / otd::LogValue::from_value(u), lam).value();
    const double lo = otd::hedge(otd::online_simple_evalue(1.0, 0.1, params) / otd::LogValue::from_value(u), lam).value();
    EXPECT_NEAR(0.1 * hi + 0.9 * lo, 1.0, 1e-14);
    EXPECT_GE(lo, 1.0 - lam - 1e-15);
  }
}

TEST(TauHat, Examples) {
  otd::HedgeSchedule s = otd::HedgeSchedule::adaptive();
  EXPECT_EQ(s.next_lambda(), 0.5);
  for (double e : {2.0, 0.5, 3.0}) s = otd::tau_hat_update(s, otd::LogValue::from_value(e));
  EXPECT_EQ(s.next_lambda(), 0.625);
  otd::HedgeSchedule low = otd::HedgeSchedule::adaptive();
  for (int i = 0; i < 9; ++i) low = otd::tau_hat_update(low, otd::LogValue::from_value(1.0));
  EXPECT_NEAR(low.next_lambda(), 0.05, 1e-15);
  EXPECT_EQ(otd::HedgeSchedule::fixed(0.3).next_lambda(), 0.3);
}

TEST(BoostingCutoff, Examples) {
  const otd::LogValue four[] = {otd::LogValue::from_value(4.0)};
  EXPECT_NEAR(otd::boosting_cutoff(four, otd::LogValue::one(), 0.05).value(), 5.0, 1e-12);
  EXPECT_NEAR(otd::boosting_cutoff({}, otd::LogValue::one(), 0.05).value(), 20.0, 1e-12);
  const otd::LogValue big[] = {otd::LogValue::from_value(15.0), otd::LogValue::from_value(10.0)};
  EXPECT_NEAR(otd::boosting_cutoff(big, otd::LogValue::one(), 0.05).value(), 15.0, 1e-12);
  EXPECT_TRUE(otd::boosting_cutoff({}, otd::LogValue::zero(), 0.05).is_infinite());
}

TEST(BoostFactor, GoldenValues) {
  EXPECT_NEAR(otd::boost_factor_lognormal(3.0, 20.0), 3.494, 1e-3);
  EXPECT_NEAR(otd::boost_factor_lognormal(3.0, 5.0), 11.826, 1e-3);
  EXPECT_NEAR(otd::boost_factor_lognormal(3.0, 100.0), 1.774, 1e-3);
  EXPECT_NEAR(otd::boost_factor_hedged_lognormal(3.0, 0.5, 20.0), 1.354, 1e-3);
}

TEST(BoostFactor, SolvesUnitExpectation) {
  for (double m : {5.0, 20.0, 100.0}) {
    const double b = otd::boost_factor_lognormal(3.0, m);
    EXPECT_NEAR(otd::truncated_lognormal_mean(3.0, b, m), 1.0, 1e-7);
  }
  const double b = otd::boost_factor_hedged_lognormal(3.0, 0.5, 20.0);
  EXPECT_NEAR(otd::truncated_hedged_lognormal_mean(3.0, 0.5, b, 20.0), 1.0, 1e-7);
}

TEST(BoostFactor, TruncatedMeanMatchesMonteCarlo) {
  std::mt19937_64 rng(26);
  std::normal_distribution<double> z(0.0, 1.0);
  const double delta = 3.0, b = 3.494, m = 20.0;
  const auto mc = monte_carlo(1000000, [&] { return std::min(b * std::exp(delta * z(rng) - delta * delta / 2), m); });
  EXPECT_NEAR(mc.mean, otd::truncated_lognormal_mean(delta, b, m), 3.0 * mc.se);
}

TEST(BoostFactor, DecreasingInCutoff) {
  double prev = INFINITY;
  for (double m : {2.0, 3.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1000.0}) {
    const double b = otd::boost_factor_lognormal(3.0, m);
    EXPECT_LT(b, prev) << m;
    prev = b;
  }
  EXPECT_EQ(otd::boost_factor_lognormal(3.0, 1.0), 1.0);
  EXPECT_EQ(otd::boost_factor_lognormal(3.0, INFINITY), 1.0);
}

TEST(BoostFactor, HedgedStaysBelowCap) {
  for (double lam : {0.1, 0.5, 0.9}) {
    for (double m : {1.5, 5.0, 20.0, 1e6}) {
      const double b = otd::boost_factor_hedged_lognormal(2.0, lam, m);
      EXPECT_GE(b, 1.0);
      EXPECT_LE(b, 1.0 / (1.0 - lam));
    }
  }
  EXPECT_EQ(otd::boost_factor_hedged_lognormal(3.0, 0.0, 20.0), 1.0);
}

TEST(GammaWeights, Sequences) {
  const auto inv = otd::GammaWeights::inverse_square();
  EXPECT_NEAR(inv(1), 6.0 / kPi2, 1e-15);
  EXPECT_NEAR(inv(3), 6.0 / (9.0 * kPi2), 1e-15);
  const auto geo = otd::GammaWeights::geometric(0.5);
  EXPECT_EQ(geo(1), 0.5);
  EXPECT_EQ(geo(3), 0.125);
  EXPECT_THROW(otd::GammaWeights::explicit_list({0.6, 0.6}), std::invalid_argument);
  EXPECT_FALSE(otd::GammaWeights::explicit_list({0.1, 0.3}).nonincreasing());
  EXPECT_EQ(otd::GammaWeights::explicit_list({0.5, 0.25})(3), 0.0);
  EXPECT_THROW(inv(0), std::out_of_range);
}
