#include "otd/closure.hpp"

#include <algorithm>
#include <cmath>

namespace otd {

namespace {

// Running statistic of a subset built in increasing index order. Once a
// prefix crosses, every extension crosses too.
class PrefixStat {
 public:
  explicit PrefixStat(const IntersectionFamily& f) : f_(&f), log_threshold_(-std::log(f.alpha)) {}

  bool crossed() const { return crossed_; }

  void push(LogValue e) {
    ++size_;
    switch (f_->kind) {
      case FamilyKind::product:
        if (e.is_infinite()) {
          ++infinities_;
        } else if (e.is_zero()) {
          ++zeros_;
        } else {
          log_sum_ += e.log();
        }
        if (infinities_ > 0 || (zeros_ == 0 && static_cast<double>(log_sum_) >= log_threshold_)) crossed_ = true;
        break;
      case FamilyKind::average:
        if (e.is_infinite()) {
          ++infinities_;
        } else if (!e.is_zero()) {
          sum_ += std::exp(static_cast<long double>(e.log()));
        }
        if (infinities_ > 0 || sum_ * f_->alpha >= static_cast<long double>(size_)) crossed_ = true;
        break;
      case FamilyKind::weighted: {
        const double g = f_->gamma(size_);
        if (g > 0.0) {
          if (e.is_infinite()) {
            ++infinities_;
          } else if (!e.is_zero()) {
            sum_ += static_cast<long double>(g) * std::exp(static_cast<long double>(e.log()));
          }
        }
        if (infinities_ > 0 || sum_ * f_->alpha >= 1.0L) crossed_ = true;
        break;
      }
    }
  }

 private:
  const IntersectionFamily* f_;
  double log_threshold_;
  std::size_t size_ = 0;
  std::size_t zeros_ = 0;
  std::size_t infinities_ = 0;
  long double log_sum_ = 0.0L;
  long double sum_ = 0.0L;
  bool crossed_ = false;
};

void require_level(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("oracle: alpha must lie in (0, 1)");
}

struct Search {
  const IntersectionFamily& family;
  std::span<const LogValue> evalues;
  std::vector<bool> in_query;
  std::vector<std::size_t> current;
  std::size_t best = 0;
  std::vector<std::size_t> best_set;

  void run(std::size_t pos, const PrefixStat& stat, std::size_t cost) {
    if (cost >= best) return;
    if (pos == evalues.size()) {
      best = cost;
      best_set = current;
      return;
    }
    PrefixStat with = stat;
    with.push(evalues[pos]);
    if (!with.crossed()) {
      current.push_back(pos + 1);
      run(pos + 1, with, cost);
      current.pop_back();
    }
    run(pos + 1, stat, cost + (in_query[pos] ? 1 : 0));
  }
};

}  // namespace

bool phi(const IntersectionFamily& family, std::span<const LogValue> evalues, std::span<const std::size_t> subset) {
  require_level(family.alpha);
  PrefixStat stat(family);
  std::size_t prev = 0;
  for (std::size_t i : subset) {
    if (i == 0 || i > evalues.size() || i <= prev) throw std::invalid_argument("phi: subset must be sorted one-based indices");
    prev = i;
    stat.push(evalues[i - 1]);
    if (stat.crossed()) return true;
  }
  return false;
}

ClosureResult closure_bound(const IntersectionFamily& family, std::span<const LogValue> evalues,
                            std::span<const std::size_t> query) {
  require_level(family.alpha);
  if (evalues.size() > kOracleCap) throw OracleCapExceeded(evalues.size(), kOracleCap);
  Search search{family, evalues, std::vector<bool>(evalues.size(), false), {}, 0, {}};
  std::size_t distinct = 0;
  for (std::size_t i : query) {
    if (i == 0 || i > evalues.size()) throw std::invalid_argument("closure: query index outside 1..t");
    if (!search.in_query[i - 1]) ++distinct;
    search.in_query[i - 1] = true;
  }
  // I = {} never crosses, so |S| is always attainable.
  search.best = distinct + 1;
  search.run(0, PrefixStat(family), 0);
  return {search.best, search.best_set};
}

FamilyKind parse_family(const std::string& name) {
  if (name == "product") return FamilyKind::product;
  if (name == "average") return FamilyKind::average;
  if (name == "weighted") return FamilyKind::weighted;
  throw std::invalid_argument("unknown intersection family '" + name + "'");
}

}  // namespace otd
