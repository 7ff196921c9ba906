#pragma once

// Special functions, log-domain arithmetic and a bracketing root finder.
// Everything here is pure and thread-safe.

#include <compare>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace otd {

/// A nonnegative quantity stored as its natural logarithm.
///
/// Zero is encoded as a log of -inf and positive infinity as +inf. Products
/// are sums of logs. When a product mixes a zero and an infinite factor the
/// infinite factor wins: an infinite e-value can only arise from a null event
/// of probability zero, so it is treated as an immediate threshold crossing.
class LogValue {
 public:
  constexpr LogValue() = default;

  static constexpr LogValue from_log(double log_v) { return LogValue(log_v); }
  static LogValue from_value(double v);

  static constexpr LogValue one() { return LogValue(0.0); }
  static constexpr LogValue zero() { return LogValue(-std::numeric_limits<double>::infinity()); }
  static constexpr LogValue infinity() { return LogValue(std::numeric_limits<double>::infinity()); }

  constexpr double log() const { return log_v_; }
  double value() const;

  constexpr bool is_zero() const { return log_v_ == -std::numeric_limits<double>::infinity(); }
  constexpr bool is_infinite() const { return log_v_ == std::numeric_limits<double>::infinity(); }
  constexpr bool is_finite() const { return !is_zero() && !is_infinite(); }

  LogValue operator*(LogValue rhs) const;
  LogValue operator/(LogValue rhs) const;
  LogValue& operator*=(LogValue rhs) { return *this = *this * rhs; }

  constexpr auto operator<=>(const LogValue&) const = default;
  constexpr bool operator==(const LogValue&) const = default;

 private:
  constexpr explicit LogValue(double log_v) : log_v_(log_v) {}
  double log_v_ = 0.0;
};

/// Running log-product that supports removal of factors.
///
/// Finite logs accumulate in extended precision; zero and infinite factors
/// are counted separately so that removing them is exact.
class LogAccumulator {
 public:
  void add(LogValue v);
  void remove(LogValue v);
  void clear() { *this = LogAccumulator{}; }
  LogValue total() const;
  std::size_t size() const { return count_; }

 private:
  long double finite_sum_ = 0.0L;
  std::size_t zeros_ = 0;
  std::size_t infinities_ = 0;
  std::size_t count_ = 0;
};

/// Standard normal CDF, accurate to about 1e-15 absolute.
double std_normal_cdf(double x);

/// Standard normal density.
double std_normal_pdf(double x);

/// Inverse of the standard normal CDF for p in (0, 1).
///
/// Wichura's AS241 rational approximation followed by one Newton step.
/// Throws std::domain_error outside the open unit interval.
double std_normal_quantile(double p);

/// log(sum_k exp(log_weight_k + log_product_k)), computed stably.
/// An empty list yields LogValue::zero().
LogValue log_sum_prod(std::span<const std::pair<double, double>> terms);

/// Signals that a root finder was handed an interval without a sign change.
class BracketError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bisection for a nondecreasing function with f(lo) <= 0 <= f(hi).
///
/// Stops once the bracket is narrower than `tol` or after 200 halvings and
/// returns the midpoint. Throws BracketError if the sign condition fails.
double solve_increasing_root(const std::function<double(double)>& f, double lo, double hi,
                             double tol);

/// Shortest decimal representation that round-trips to the same double.
/// Infinities are written as "inf" / "-inf".
std::string format_double(double v);

/// Inverse of format_double. Throws std::invalid_argument on malformed input.
double parse_double(const std::string& text);

}  // namespace otd
