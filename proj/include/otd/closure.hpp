#pragma once

// Brute-force online closed procedure.
//
// d(S) = min{ |S \ I| : I subset of {1..t}, phi_I = 0 } for one of three
// increasing families of intersection tests. Exponential in t, so t is
// capped at kOracleCap.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "otd/evalues.hpp"
#include "otd/numerics.hpp"

namespace otd {

inline constexpr std::size_t kOracleCap = 20;

enum class FamilyKind {
  product,   ///< some prefix product over I reaches 1/alpha
  average,   ///< some prefix mean over I reaches 1/alpha
  weighted,  ///< sum_{i in I} E_i gamma_{t(i; I)} reaches 1/alpha
};

struct IntersectionFamily {
  FamilyKind kind = FamilyKind::product;
  double alpha = 0.05;
  GammaWeights gamma;

  static IntersectionFamily product(double alpha) { return {FamilyKind::product, alpha, {}}; }
  static IntersectionFamily average(double alpha) { return {FamilyKind::average, alpha, {}}; }
  static IntersectionFamily weighted(double alpha, GammaWeights g) { return {FamilyKind::weighted, alpha, std::move(g)}; }
};

class OracleCapExceeded : public std::runtime_error {
 public:
  OracleCapExceeded(std::size_t t, std::size_t cap)
      : std::runtime_error("oracle cap exceeded: t = " + std::to_string(t) + " > " + std::to_string(cap)),
        t_(t),
        cap_(cap) {}
  std::size_t t() const { return t_; }
  std::size_t cap() const { return cap_; }

 private:
  std::size_t t_;
  std::size_t cap_;
};

/// phi_I for I given as sorted one-based indices into `evalues`.
bool phi(const IntersectionFamily& family, std::span<const LogValue> evalues, std::span<const std::size_t> subset);

struct ClosureResult {
  std::size_t bound = 0;
  std::vector<std::size_t> minimizer;  ///< an I with phi_I = 0 attaining the bound (one-based)
};

/// Throws OracleCapExceeded when evalues.size() > kOracleCap and
/// std::invalid_argument if S contains an index outside 1..t.
ClosureResult closure_bound(const IntersectionFamily& family, std::span<const LogValue> evalues,
                            std::span<const std::size_t> query);

FamilyKind parse_family(const std::string& name);

}  // namespace otd
