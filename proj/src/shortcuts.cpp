#include "otd/shortcuts.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "otd/evalues.hpp"
#include "otd/guard.hpp"

namespace otd {

namespace {

constexpr std::array<std::pair<PMethod, std::string_view>, 10> kNames = {{
    {PMethod::online_simple, "online-simple"},
    {PMethod::closed_os, "closed-os"},
    {PMethod::admissible_os, "admissible-os"},
    {PMethod::online_adaptive, "online-adaptive"},
    {PMethod::closed_adaptive, "closed-adaptive"},
    {PMethod::admissible_adaptive, "admissible-adaptive"},
    {PMethod::u_os, "u-os"},
    {PMethod::m_os, "m-os"},
    {PMethod::u_freedman, "u-freedman"},
    {PMethod::m_freedman, "m-freedman"},
}};

constexpr double kPi2 = std::numbers::pi * std::numbers::pi;

std::size_t clamp_ceil(double score) {
  const double c = std::ceil(score);
  return c > 0.0 ? static_cast<std::size_t>(c) : 0;
}

bool queried(const PStep& s) { return s.p <= s.alpha_i; }

// ---------------------------------------------------------------------------

class GuardedOnlineSimple final : public PStreamProcedure {
 public:
  GuardedOnlineSimple(const PStreamConfig& cfg, bool admissible)
      : params_(OnlineSimpleParams::make(cfg.alpha, cfg.a)), admissible_(admissible), guard_(cfg.alpha) {}

  TraceRow push(const PStep& s) override {
    LogValue e = online_simple_evalue(s.p, s.alpha_i, params_);
    if (admissible_) e = e / LogValue::from_value(online_simple_slack(s.alpha_i, params_));
    const auto out = guard_.step(e, queried(s));
    return make_row(out, guard_.state().query.size());
  }
  std::size_t bound() const override { return guard_.state().bound; }

 private:
  OnlineSimpleParams params_;
  bool admissible_;
  SeqEGuard guard_;
};

class GuardedOnlineAdaptive final : public PStreamProcedure {
 public:
  GuardedOnlineAdaptive(const PStreamConfig& cfg, bool admissible)
      : params_(OnlineAdaptiveParams::make(cfg.alpha, cfg.a, cfg.B)), admissible_(admissible), guard_(cfg.alpha) {}

  TraceRow push(const PStep& s) override {
    LogValue e = online_adaptive_evalue(s.p, s.alpha_i, s.lambda_i, params_);
    if (admissible_) e = e / LogValue::from_value(online_adaptive_slack(s.alpha_i, s.lambda_i, params_));
    const auto out = guard_.step(e, queried(s));
    return make_row(out, guard_.state().query.size());
  }
  std::size_t bound() const override { return guard_.state().bound; }

 private:
  OnlineAdaptiveParams params_;
  bool admissible_;
  SeqEGuard guard_;
};

class BaselineOnlineSimple final : public PStreamProcedure {
 public:
  explicit BaselineOnlineSimple(const PStreamConfig& cfg) : params_(OnlineSimpleParams::make(cfg.alpha, cfg.a)) {}

  TraceRow push(const PStep& s) override {
    ++t_;
    if (queried(s)) ++size_;
    sum_ += (queried(s) ? 1.0 : 0.0) - params_.c * s.alpha_i;
    const double score = -params_.c * params_.a + sum_;
    d_ = clamp_ceil(score);
    return {t_, queried(s), d_, size_, score};
  }
  std::size_t bound() const override { return d_; }

 private:
  OnlineSimpleParams params_;
  std::size_t t_ = 0, size_ = 0, d_ = 0;
  double sum_ = 0.0;
};

class BaselineOnlineAdaptive final : public PStreamProcedure {
 public:
  explicit BaselineOnlineAdaptive(const PStreamConfig& cfg)
      : params_(OnlineAdaptiveParams::make(cfg.alpha, cfg.a, cfg.B)) {}

  TraceRow push(const PStep& s) override {
    // Validates lambda_i and the ratio bound.
    (void)online_adaptive_evalue(s.p, s.alpha_i, s.lambda_i, params_);
    ++t_;
    if (queried(s)) ++size_;
    const double ratio = s.alpha_i / (1.0 - s.lambda_i);
    sum_ += (queried(s) ? 1.0 : 0.0) - params_.c * ratio * (s.p > s.lambda_i ? 1.0 : 0.0);
    const double score = -params_.c * params_.a + sum_;
    d_ = clamp_ceil(score);
    return {t_, queried(s), d_, size_, score};
  }
  std::size_t bound() const override { return d_; }

 private:
  OnlineAdaptiveParams params_;
  std::size_t t_ = 0, size_ = 0, d_ = 0;
  double sum_ = 0.0;
};

class UnionOnlineSimple final : public PStreamProcedure {
 public:
  explicit UnionOnlineSimple(const PStreamConfig& cfg) {
    for (std::size_t a = 1; a <= cfg.a_max; ++a) {
      const double ad = static_cast<double>(a);
      grid_.push_back(OnlineSimpleParams::make(6.0 * cfg.alpha / (ad * ad * kPi2), ad));
    }
  }

  TraceRow push(const PStep& s) override {
    ++t_;
    if (queried(s)) {
      ++size_;
      ++hits_;
    }
    alpha_sum_ += s.alpha_i;
    double best = -std::numeric_limits<double>::infinity();
    d_ = 0;
    for (const auto& p : grid_) {
      const double score = -p.c * p.a + static_cast<double>(hits_) - p.c * alpha_sum_;
      best = std::max(best, score);
      d_ = std::max(d_, clamp_ceil(score));
    }
    return {t_, queried(s), d_, size_, best};
  }
  std::size_t bound() const override { return d_; }

 private:
  std::vector<OnlineSimpleParams> grid_;
  std::size_t t_ = 0, size_ = 0, hits_ = 0, d_ = 0;
  double alpha_sum_ = 0.0;
};

class UnionFreedman final : public PStreamProcedure {
 public:
  explicit UnionFreedman(const PStreamConfig& cfg) {
    for (double a : freedman_grid(cfg.j_max)) grid_.push_back(FreedmanParams::make(cfg.alpha, a));
  }

  TraceRow push(const PStep& s) override {
    ++t_;
    if (queried(s)) {
      ++size_;
      ++hits_;
    }
    centered_ += (queried(s) ? 1.0 : 0.0) - s.alpha_i;
    variance_ += s.alpha_i * (1.0 - s.alpha_i);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t d = 0;
    for (const auto& f : grid_) {
      if (variance_ > f.a) continue;
      const double score = -f.kappa + centered_;
      best = std::max(best, score);
      const double v = 1.0 + std::floor(score);
      if (v > 0.0) d = std::max(d, static_cast<std::size_t>(v));
    }
    d_ = d;
    return {t_, queried(s), d_, size_, best};
  }
  std::size_t bound() const override { return d_; }

 private:
  std::vector<FreedmanParams> grid_;
  std::size_t t_ = 0, size_ = 0, hits_ = 0, d_ = 0;
  double centered_ = 0.0;
  double variance_ = 0.0;
};

class MixtureOnlineSimple final : public PStreamProcedure {
 public:
  explicit MixtureOnlineSimple(const PStreamConfig& cfg)
      : guard_(cfg.alpha, m_os_log_weights(cfg.a_max)), logs_(cfg.a_max) {
    for (std::size_t a = 1; a <= cfg.a_max; ++a) {
      const double ad = static_cast<double>(a);
      grid_.push_back(OnlineSimpleParams::make(6.0 * cfg.alpha / (ad * ad * kPi2), ad));
    }
  }

  TraceRow push(const PStep& s) override {
    for (std::size_t k = 0; k < grid_.size(); ++k) logs_[k] = online_simple_evalue(s.p, s.alpha_i, grid_[k]).log();
    const auto out = guard_.step(logs_, queried(s), s.alpha_i);
    return make_row(out, guard_.state().query.size());
  }
  std::size_t bound() const override { return guard_.state().bound; }

 private:
  std::vector<OnlineSimpleParams> grid_;
  MixtureGuard guard_;
  std::vector<double> logs_;
};

class MixtureFreedman final : public PStreamProcedure {
 public:
  explicit MixtureFreedman(const PStreamConfig& cfg)
      : guard_(cfg.alpha, m_freedman_log_weights(cfg.j_max)), logs_(cfg.j_max + 1) {
    for (double a : freedman_grid(cfg.j_max)) grid_.push_back(FreedmanParams::make(cfg.alpha, a));
  }

  TraceRow push(const PStep& s) override {
    for (std::size_t k = 0; k < grid_.size(); ++k) logs_[k] = freedman_evalue(s.p, s.alpha_i, grid_[k]).log();
    const auto out = guard_.step(logs_, queried(s), s.alpha_i);
    return make_row(out, guard_.state().query.size());
  }
  std::size_t bound() const override { return guard_.state().bound; }

 private:
  std::vector<FreedmanParams> grid_;
  MixtureGuard guard_;
  std::vector<double> logs_;
};

}  // namespace

std::string_view to_string(PMethod m) {
  for (const auto& [method, name] : kNames) {
    if (method == m) return name;
  }
  return "unknown";
}

std::optional<PMethod> parse_pmethod(std::string_view name) {
  for (const auto& [method, n] : kNames) {
    if (n == name) return method;
  }
  return std::nullopt;
}

void PStreamConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (!(a > 0.0)) throw std::invalid_argument("a must be positive");
  if (!(B > 0.0) || !std::isfinite(B)) throw std::invalid_argument("B must be positive and finite");
  if (a_max == 0) throw std::invalid_argument("a_max must be at least 1");
}

std::unique_ptr<PStreamProcedure> make_pstream(const PStreamConfig& cfg) {
  cfg.validate();
  switch (cfg.method) {
    case PMethod::online_simple:
      return std::make_unique<BaselineOnlineSimple>(cfg);
    case PMethod::closed_os:
      return std::make_unique<GuardedOnlineSimple>(cfg, false);
    case PMethod::admissible_os:
      return std::make_unique<GuardedOnlineSimple>(cfg, true);
    case PMethod::online_adaptive:
      return std::make_unique<BaselineOnlineAdaptive>(cfg);
    case PMethod::closed_adaptive:
      return std::make_unique<GuardedOnlineAdaptive>(cfg, false);
    case PMethod::admissible_adaptive:
      return std::make_unique<GuardedOnlineAdaptive>(cfg, true);
    case PMethod::u_os:
      return std::make_unique<UnionOnlineSimple>(cfg);
    case PMethod::m_os:
      return std::make_unique<MixtureOnlineSimple>(cfg);
    case PMethod::u_freedman:
      return std::make_unique<UnionFreedman>(cfg);
    case PMethod::m_freedman:
      return std::make_unique<MixtureFreedman>(cfg);
  }
  throw std::invalid_argument("unknown p-value method");
}

BoundTrace run_pstream(const PStreamConfig& cfg, std::span<const PStep> steps) {
  auto proc = make_pstream(cfg);
  BoundTrace trace;
  trace.reserve(steps.size());
  for (const auto& s : steps) trace.push_back(proc->push(s));
  return trace;
}

BoundTrace closed_online_simple_sum_form(std::span<const PStep> steps, double alpha, double a) {
  const auto params = OnlineSimpleParams::make(alpha, a);
  const double target = params.c * params.a;
  std::vector<double> terms;
  std::vector<bool> removed;
  std::vector<std::size_t> query;
  std::size_t d = 0;
  BoundTrace trace;
  for (std::size_t t = 1; t <= steps.size(); ++t) {
    const PStep& s = steps[t - 1];
    terms.push_back((queried(s) ? 1.0 : 0.0) - params.c * s.alpha_i);
    removed.push_back(false);
    if (queried(s)) query.push_back(t);
    double sum = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      if (!removed[i]) sum += terms[i];
    }
    if (sum >= target) {
      ++d;
      std::size_t pick = 0;
      for (std::size_t i : query) {
        if (removed[i - 1]) continue;
        if (pick == 0 || steps[i - 1].alpha_i < steps[pick - 1].alpha_i) pick = i;
      }
      if (pick != 0) removed[pick - 1] = true;
    }
    trace.push_back({t, queried(s), d, query.size(), params.theta_c * sum});
  }
  return trace;
}

std::vector<double> m_os_log_weights(std::size_t a_max) {
  std::vector<double> w;
  for (std::size_t a = 1; a <= a_max; ++a) {
    const double ad = static_cast<double>(a);
    w.push_back(std::log(6.0 / (ad * ad * kPi2)));
  }
  return w;
}

std::vector<double> freedman_grid(std::size_t j_max) {
  std::vector<double> grid;
  for (std::size_t j = 0; j <= j_max; ++j) grid.push_back(std::exp2(0.5 * static_cast<double>(j)));
  return grid;
}

std::vector<double> m_freedman_log_weights(std::size_t j_max) {
  std::vector<double> w;
  for (std::size_t j = 0; j <= j_max; ++j) {
    const double m = static_cast<double>(std::max<std::size_t>(j, 1));
    w.push_back(std::log(6.0 / (m * m * (kPi2 + 6.0))));
  }
  return w;
}

}  // namespace otd
