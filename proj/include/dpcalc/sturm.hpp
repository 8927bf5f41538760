#pragma once

// Real root isolation over Q with Sturm sequences. Exact rational arithmetic.

#include <utility>
#include <vector>

#include "dpcalc/upoly.hpp"

namespace dpcalc {

class SturmChain {
 public:
  explicit SturmChain(const UPoly& p);
  /// Number of distinct real roots in the half-open interval (a, b].
  int count_roots(const Rational& a, const Rational& b) const;
  int sign_changes(const Rational& x) const;
  const std::vector<UPoly>& chain() const { return chain_; }

 private:
  std::vector<UPoly> chain_;
};

/// p / gcd(p, p'): same distinct roots, all simple.
UPoly squarefree_part(const UPoly& p);

/// Bound B with every real root r satisfying |r| < B.
Rational cauchy_bound(const UPoly& p);

/// Disjoint intervals (a_j, b_j] with a_j < b_j, increasing, each containing
/// exactly one distinct root of p in (lo, hi]. p must be nonzero.
std::vector<std::pair<Rational, Rational>> isolate_roots(const UPoly& p, const Rational& lo, const Rational& hi);

/// True iff p(x) >= 0 for every real x > a.
bool nonneg_on_ray(const UPoly& p, const Rational& a);

}  // namespace dpcalc
