#include "otd/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <system_error>

namespace otd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <std::size_t N>
double horner(const double (&coef)[N], double x) {
  double acc = coef[N - 1];
  for (std::size_t k = N - 1; k-- > 0;) acc = acc * x + coef[k];
  return acc;
}

// AS241 (PPND16) coefficients, lowest order first.
constexpr double kA[] = {3.3871328727963666080e0,  1.3314166789178437745e+2,
                         1.9715909503065514427e+3, 1.3731693765509461125e+4,
                         4.5921953931549871457e+4, 6.7265770927008700853e+4,
                         3.3430575583588128105e+4, 2.5090809287301226727e+3};
constexpr double kB[] = {1.0,
                         4.2313330701600911252e+1,
                         6.8718700749205790830e+2,
                         5.3941960214247511077e+3,
                         2.1213794301586595867e+4,
                         3.9307895800092710610e+4,
                         2.8729085735721942674e+4,
                         5.2264952788528545610e+3};
constexpr double kC[] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                         5.76949722146069140550e0, 3.64784832476320460504e0,
                         1.27045825245236838258e0, 2.41780725177450611770e-1,
                         2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr double kD[] = {1.0,
                         2.05319162663775882187e0,
                         1.67638483018380384940e0,
                         6.89767334985100004550e-1,
                         1.48103976427480074590e-1,
                         1.51986665636164571966e-2,
                         5.47593808499534494600e-4,
                         1.05075007164441684324e-9};
constexpr double kE[] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                         1.78482653991729133580e0, 2.96560571828504891230e-1,
                         2.65321895265761230930e-2, 1.24266094738807843860e-3,
                         2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[] = {1.0,
                         5.99832206555887937690e-1,
                         1.36929880922735805310e-1,
                         1.48753612908506148525e-2,
                         7.86869131145613259100e-4,
                         1.84631831751005468180e-5,
                         1.42151175831644588870e-7,
                         2.04426310338993978564e-15};

double as241(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * horner(kA, r) / horner(kB, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = horner(kC, r) / horner(kD, r);
  } else {
    r -= 5.0;
    x = horner(kE, r) / horner(kF, r);
  }
  return q < 0.0 ? -x : x;
}

}  // namespace

LogValue LogValue::from_value(double v) {
  if (std::isnan(v) || v < 0.0) throw std::domain_error("LogValue requires a nonnegative value");
  if (v == 0.0) return zero();
  return LogValue(std::log(v));
}

double LogValue::value() const { return std::exp(log_v_); }

LogValue LogValue::operator*(LogValue rhs) const {
  if (is_infinite() || rhs.is_infinite()) return infinity();
  if (is_zero() || rhs.is_zero()) return zero();
  return LogValue(log_v_ + rhs.log_v_);
}

LogValue LogValue::operator/(LogValue rhs) const {
  if (rhs.is_zero()) throw std::domain_error("LogValue division by zero");
  if (is_infinite()) return infinity();
  if (rhs.is_infinite()) return zero();
  if (is_zero()) return zero();
  return LogValue(log_v_ - rhs.log_v_);
}

void LogAccumulator::add(LogValue v) {
  ++count_;
  if (v.is_infinite()) {
    ++infinities_;
  } else if (v.is_zero()) {
    ++zeros_;
  } else {
    finite_sum_ += v.log();
  }
}

void LogAccumulator::remove(LogValue v) {
  if (count_ == 0) throw std::logic_error("LogAccumulator::remove on empty accumulator");
  --count_;
  if (v.is_infinite()) {
    --infinities_;
  } else if (v.is_zero()) {
    --zeros_;
  } else {
    finite_sum_ -= v.log();
  }
}

LogValue LogAccumulator::total() const {
  if (infinities_ > 0) return LogValue::infinity();
  if (zeros_ > 0) return LogValue::zero();
  return LogValue::from_log(static_cast<double>(finite_sum_));
}

double std_normal_cdf(double x) {
  if (std::isnan(x)) throw std::domain_error("std_normal_cdf of NaN");
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double std_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("std_normal_quantile requires 0 < p < 1");
  double x = as241(p);
  const double density = std_normal_pdf(x);
  if (density > 0.0) {
    // Residual in the tail that keeps its relative precision.
    const double residual = p <= 0.5 ? std_normal_cdf(x) - p : (1.0 - p) - std_normal_cdf(-x);
    const double refined = p <= 0.5 ? x - residual / density : x + residual / density;
    if (std::isfinite(refined)) x = refined;
  }
  return x;
}

LogValue log_sum_prod(std::span<const std::pair<double, double>> terms) {
  double peak = -kInf;
  for (const auto& [lw, lp] : terms) {
    const double s = lw + lp;
    if (s == kInf) return LogValue::infinity();
    if (!std::isnan(s)) peak = std::max(peak, s);
  }
  if (peak == -kInf) return LogValue::zero();
  long double acc = 0.0L;
  for (const auto& [lw, lp] : terms) {
    const double s = lw + lp;
    if (!std::isnan(s)) acc += std::exp(static_cast<long double>(s - peak));
  }
  return LogValue::from_log(peak + static_cast<double>(std::log(acc)));
}

double solve_increasing_root(const std::function<double(double)>& f, double lo, double hi,
                             double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("solve_increasing_root: tol must be positive");
  if (!(lo <= hi)) throw BracketError("solve_increasing_root: lo > hi");
  const double f_lo = f(lo);
  const double f_hi = f(hi);
  if (f_lo > 0.0 || f_hi < 0.0) {
    throw BracketError("solve_increasing_root: f(lo) <= 0 <= f(hi) violated");
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  for (int iter = 0; iter < 200 && hi - lo > tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::string format_double(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& text) {
  if (text == "inf" || text == "+inf") return kInf;
  if (text == "-inf") return -kInf;
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw std::invalid_argument("not a decimal number: '" + text + "'");
  }
  return v;
}

}  // namespace otd
