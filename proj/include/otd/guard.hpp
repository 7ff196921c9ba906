#pragma once

// Streaming shortcuts of the online closed procedure.
//
// Each guard consumes one e-value per step together with the caller's
// decision whether the index joins the query set S_t, and maintains a lower
// bound d_t on the number of false hypotheses in S_t that holds with
// probability 1 - alpha simultaneously over all t.
//
//   SeqEGuard    sequential e-values, products over A cup U
//   ExEGuard     exchangeable null e-values, averages over A cup U
//   ArbEGuard    arbitrary dependence, rank-weighted sums over S \ A^c
//   MixtureGuard weighted mixture of several product martingales
//
// Every removal rule breaks ties towards the smallest index.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "otd/evalues.hpp"
#include "otd/numerics.hpp"

namespace otd {

struct IndexedEvalue {
  std::size_t index = 0;  ///< one-based step at which the e-value arrived
  LogValue e;

  bool operator==(const IndexedEvalue&) const = default;
};

struct GuardState {
  std::size_t t = 0;
  std::vector<std::size_t> query;          ///< S_t in arrival order
  std::vector<IndexedEvalue> active;       ///< A: queried, not yet excluded
  std::vector<IndexedEvalue> discarded;    ///< U: non-queried e-values kept in the statistic
  std::vector<std::size_t> excluded;       ///< removal order of indices taken out of A
  std::size_t bound = 0;                   ///< d_t

  bool operator==(const GuardState&) const = default;
};

struct StepOutcome {
  std::size_t t = 0;
  std::size_t bound = 0;
  bool included = false;
  bool bound_incremented = false;
  std::optional<std::size_t> removed_index;
  /// Statistic compared against 1/alpha at this step (before any removal);
  /// for excluded steps the statistic after the update.
  LogValue statistic;

  bool operator==(const StepOutcome&) const = default;
};

/// Product shortcut for sequential e-values.
class SeqEGuard {
 public:
  explicit SeqEGuard(double alpha);

  StepOutcome step(LogValue e, bool include);

  const GuardState& state() const { return state_; }
  double alpha() const { return alpha_; }
  /// prod_{A cup U} E_i.
  LogValue statistic() const { return product_.total(); }
  /// Boosting cutoff m_{t+1} computed from the current A and U.
  LogValue boosting_cutoff() const;

 private:
  void recompute_product();

  double alpha_;
  LogValue threshold_;
  GuardState state_;
  LogAccumulator product_;
};

/// Average shortcut for exchangeable null e-values.
class ExEGuard {
 public:
  explicit ExEGuard(double alpha);

  StepOutcome step(LogValue e, bool include);

  const GuardState& state() const { return state_; }
  double alpha() const { return alpha_; }
  /// Mean of the e-values in A cup U (zero when both are empty).
  LogValue statistic() const;

 private:
  void recompute_sum();
  void add_to_sum(LogValue e);

  double alpha_;
  GuardState state_;
  long double sum_ = 0.0L;
  std::size_t infinite_ = 0;
};

/// Conservative weighted-average shortcut for arbitrarily dependent e-values.
/// Non-queried e-values are treated as zero; they only shift ranks.
class ArbEGuard {
 public:
  /// Throws std::invalid_argument if gamma is not nonincreasing.
  ArbEGuard(double alpha, GammaWeights gamma);

  StepOutcome step(LogValue e, bool include);

  const GuardState& state() const { return state_; }
  double alpha() const { return alpha_; }
  const GammaWeights& gamma() const { return gamma_; }
  /// sum_{i in S \ A^c} E_i gamma_{t(i; {1..t} \ A^c)}.
  LogValue statistic() const;

 private:
  LogValue statistic_without(std::size_t skip) const;

  double alpha_;
  GammaWeights gamma_;
  GuardState state_;
  std::vector<std::size_t> excluded_sorted_;
};

struct MixtureEntry {
  std::size_t index = 0;
  double removal_key = 0.0;
  std::vector<double> component_log_e;

  bool operator==(const MixtureEntry&) const = default;
};

struct MixtureState {
  std::size_t t = 0;
  std::vector<std::size_t> query;
  std::vector<MixtureEntry> active;      ///< queried entries not in A^c
  std::vector<std::size_t> excluded;     ///< A^c in removal order
  std::size_t bound = 0;

  bool operator==(const MixtureState&) const = default;
};

/// Mixture shortcut: statistic sum_a w_a prod_{i not in A^c} E_i^(a).
///
/// Valid when every component ranks the queried e-values the same way; the
/// caller supplies that ranking as a removal key (smallest key = largest
/// e-value in every component).
class MixtureGuard {
 public:
  MixtureGuard(double alpha, std::vector<double> log_weights);

  /// Throws std::invalid_argument if the vector does not match the grid.
  StepOutcome step(std::span<const double> component_log_e, bool include, double removal_key);

  const MixtureState& state() const { return state_; }
  std::size_t components() const { return log_weights_.size(); }
  LogValue statistic() const;

 private:
  double alpha_;
  LogValue threshold_;
  std::vector<double> log_weights_;
  std::vector<LogAccumulator> sums_;
  MixtureState state_;
};

}  // namespace otd
