#include "otd/guard.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace otd {

namespace {

void require_level(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("guard: alpha must lie in (0, 1)");
}

// Position of the largest e-value; the earliest index wins ties.
std::size_t argmax_evalue(const std::vector<IndexedEvalue>& entries) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (entries[k].e > entries[best].e) best = k;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------

SeqEGuard::SeqEGuard(double alpha) : alpha_(alpha) {
  require_level(alpha);
  threshold_ = LogValue::from_log(-std::log(alpha));
}

void SeqEGuard::recompute_product() {
  product_.clear();
  auto a = state_.active.begin();
  auto u = state_.discarded.begin();
  while (a != state_.active.end() || u != state_.discarded.end()) {
    if (u == state_.discarded.end() || (a != state_.active.end() && a->index < u->index)) {
      product_.add((a++)->e);
    } else {
      product_.add((u++)->e);
    }
  }
}

StepOutcome SeqEGuard::step(LogValue e, bool include) {
  StepOutcome out;
  out.t = ++state_.t;
  out.included = include;
  if (include) {
    state_.query.push_back(out.t);
    state_.active.push_back({out.t, e});
    product_.add(e);
    out.statistic = product_.total();
    if (out.statistic >= threshold_) {
      ++state_.bound;
      out.bound_incremented = true;
      const std::size_t pos = argmax_evalue(state_.active);
      out.removed_index = state_.active[pos].index;
      state_.excluded.push_back(*out.removed_index);
      state_.active.erase(state_.active.begin() + static_cast<std::ptrdiff_t>(pos));
      recompute_product();
    }
  } else {
    if (e < LogValue::one()) {
      state_.discarded.push_back({out.t, e});
      product_.add(e);
    }
    out.statistic = product_.total();
  }
  out.bound = state_.bound;
  return out;
}

LogValue SeqEGuard::boosting_cutoff() const {
  std::vector<LogValue> active;
  active.reserve(state_.active.size());
  for (const auto& entry : state_.active) active.push_back(entry.e);
  LogAccumulator discards;
  for (const auto& entry : state_.discarded) discards.add(entry.e);
  return otd::boosting_cutoff(active, discards.total(), alpha_);
}

// ---------------------------------------------------------------------------

ExEGuard::ExEGuard(double alpha) : alpha_(alpha) { require_level(alpha); }

void ExEGuard::add_to_sum(LogValue e) {
  if (e.is_infinite()) {
    ++infinite_;
  } else if (!e.is_zero()) {
    sum_ += std::exp(static_cast<long double>(e.log()));
  }
}

void ExEGuard::recompute_sum() {
  sum_ = 0.0L;
  infinite_ = 0;
  for (const auto& entry : state_.active) add_to_sum(entry.e);
  for (const auto& entry : state_.discarded) add_to_sum(entry.e);
}

LogValue ExEGuard::statistic() const {
  if (infinite_ > 0) return LogValue::infinity();
  const std::size_t count = state_.active.size() + state_.discarded.size();
  if (count == 0 || sum_ == 0.0L) return LogValue::zero();
  return LogValue::from_log(static_cast<double>(std::log(sum_) - std::log(static_cast<long double>(count))));
}

StepOutcome ExEGuard::step(LogValue e, bool include) {
  StepOutcome out;
  out.t = ++state_.t;
  out.included = include;
  if (include) {
    state_.query.push_back(out.t);
    state_.active.push_back({out.t, e});
    add_to_sum(e);
    out.statistic = statistic();
    const auto count = static_cast<long double>(state_.active.size() + state_.discarded.size());
    if (infinite_ > 0 || sum_ * alpha_ >= count) {
      ++state_.bound;
      out.bound_incremented = true;
      const std::size_t pos = argmax_evalue(state_.active);
      out.removed_index = state_.active[pos].index;
      state_.excluded.push_back(*out.removed_index);
      state_.active.erase(state_.active.begin() + static_cast<std::ptrdiff_t>(pos));
      recompute_sum();
    }
  } else {
    // e < 1/alpha, compared in the log domain.
    if (e.log() < -std::log(alpha_)) {
      state_.discarded.push_back({out.t, e});
      add_to_sum(e);
    }
    out.statistic = statistic();
  }
  out.bound = state_.bound;
  return out;
}

// ---------------------------------------------------------------------------

ArbEGuard::ArbEGuard(double alpha, GammaWeights gamma) : alpha_(alpha), gamma_(std::move(gamma)) {
  require_level(alpha);
  if (!gamma_.nonincreasing()) throw std::invalid_argument("ArbE-Guard needs nonincreasing gamma weights");
}

LogValue ArbEGuard::statistic_without(std::size_t skip) const {
  std::vector<std::pair<double, double>> terms;
  terms.reserve(state_.active.size());
  for (const auto& entry : state_.active) {
    if (entry.index == skip) continue;
    const auto below = static_cast<std::size_t>(
        std::lower_bound(excluded_sorted_.begin(), excluded_sorted_.end(), entry.index) -
        excluded_sorted_.begin());
    std::size_t rank = entry.index - below;
    if (skip != 0 && skip < entry.index) --rank;
    terms.emplace_back(std::log(gamma_(rank)), entry.e.log());
  }
  return log_sum_prod(terms);
}

LogValue ArbEGuard::statistic() const { return statistic_without(0); }

StepOutcome ArbEGuard::step(LogValue e, bool include) {
  StepOutcome out;
  out.t = ++state_.t;
  out.included = include;
  if (include) {
    state_.query.push_back(out.t);
    state_.active.push_back({out.t, e});
    out.statistic = statistic();
    if (out.statistic.log() >= -std::log(alpha_)) {
      ++state_.bound;
      out.bound_incremented = true;
      std::size_t best = 0;
      LogValue best_value = LogValue::infinity();
      bool first = true;
      for (std::size_t k = 0; k < state_.active.size(); ++k) {
        const LogValue v = statistic_without(state_.active[k].index);
        if (first || v < best_value) {
          best = k;
          best_value = v;
          first = false;
        }
      }
      out.removed_index = state_.active[best].index;
      state_.excluded.push_back(*out.removed_index);
      excluded_sorted_.insert(
          std::upper_bound(excluded_sorted_.begin(), excluded_sorted_.end(), *out.removed_index),
          *out.removed_index);
      state_.active.erase(state_.active.begin() + static_cast<std::ptrdiff_t>(best));
    }
  } else {
    out.statistic = statistic();
  }
  out.bound = state_.bound;
  return out;
}

// ---------------------------------------------------------------------------

MixtureGuard::MixtureGuard(double alpha, std::vector<double> log_weights)
    : alpha_(alpha), log_weights_(std::move(log_weights)), sums_(log_weights_.size()) {
  require_level(alpha);
  if (log_weights_.empty()) throw std::invalid_argument("mixture guard: empty grid");
  threshold_ = LogValue::from_log(-std::log(alpha));
}

LogValue MixtureGuard::statistic() const {
  std::vector<std::pair<double, double>> terms;
  terms.reserve(sums_.size());
  for (std::size_t k = 0; k < sums_.size(); ++k) terms.emplace_back(log_weights_[k], sums_[k].total().log());
  return log_sum_prod(terms);
}

StepOutcome MixtureGuard::step(std::span<const double> component_log_e, bool include,
                               double removal_key) {
  if (component_log_e.size() != log_weights_.size()) {
    throw std::invalid_argument("mixture guard: e-value vector does not match the grid");
  }
  StepOutcome out;
  out.t = ++state_.t;
  out.included = include;
  for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k].add(LogValue::from_log(component_log_e[k]));
  if (include) {
    state_.query.push_back(out.t);
    state_.active.push_back(
        {out.t, removal_key, std::vector<double>(component_log_e.begin(), component_log_e.end())});
  }
  out.statistic = statistic();
  if (include && out.statistic >= threshold_) {
    ++state_.bound;
    out.bound_incremented = true;
    std::size_t pos = 0;
    for (std::size_t k = 1; k < state_.active.size(); ++k) {
      if (state_.active[k].removal_key < state_.active[pos].removal_key) pos = k;
    }
    const MixtureEntry& gone = state_.active[pos];
    for (std::size_t k = 0; k < sums_.size(); ++k) sums_[k].remove(LogValue::from_log(gone.component_log_e[k]));
    out.removed_index = gone.index;
    state_.excluded.push_back(gone.index);
    state_.active.erase(state_.active.begin() + static_cast<std::ptrdiff_t>(pos));
  }
  out.bound = state_.bound;
  return out;
}

}  // namespace otd
