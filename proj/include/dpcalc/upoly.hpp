#pragma once

// Dense univariate polynomials over Q, coefficient of X^i at index i.
// The zero polynomial has no coefficients.

#include <string>
#include <vector>

#include "dpcalc/rational.hpp"

namespace dpcalc {

class UPoly {
 public:
  UPoly() = default;
  UPoly(std::vector<Rational> coeffs);  // NOLINT(implicit)
  static UPoly constant(const Rational& c);
  static UPoly monomial(const Rational& c, std::size_t k);
  /// X^k - 1
  static UPoly x_pow_minus_one(std::size_t k);

  bool is_zero() const { return c_.empty(); }
  /// -1 for the zero polynomial.
  long degree() const { return static_cast<long>(c_.size()) - 1; }
  const std::vector<Rational>& coeffs() const { return c_; }
  Rational coeff(std::size_t i) const { return i < c_.size() ? c_[i] : Rational(0); }
  const Rational& lead() const { return c_.back(); }

  Rational eval(const Rational& x) const;
  UPoly derivative() const;
  UPoly monic() const;
  /// Number of trailing zero coefficients (the power of X dividing the polynomial).
  std::size_t low_order() const;
  UPoly shift_down(std::size_t k) const;

  friend UPoly operator+(const UPoly& a, const UPoly& b);
  friend UPoly operator-(const UPoly& a, const UPoly& b);
  friend UPoly operator-(const UPoly& a);
  friend UPoly operator*(const UPoly& a, const UPoly& b);
  friend UPoly operator*(const Rational& s, const UPoly& a);
  friend bool operator==(const UPoly& a, const UPoly& b) { return a.c_ == b.c_; }

  std::string str(const std::string& var = "X") const;

 private:
  void trim();
  std::vector<Rational> c_;
};

/// Euclidean division; b must be nonzero.
void divmod(const UPoly& a, const UPoly& b, UPoly& q, UPoly& r);
UPoly operator%(const UPoly& a, const UPoly& b);
/// Exact quotient; throws std::domain_error when b does not divide a.
UPoly exact_div(const UPoly& a, const UPoly& b);
/// Monic gcd (zero when both are zero).
UPoly gcd(const UPoly& a, const UPoly& b);
UPoly pow(const UPoly& a, unsigned e);

/// d-th cyclotomic polynomial (integer coefficients).
const UPoly& cyclotomic(unsigned d);

}  // namespace dpcalc
