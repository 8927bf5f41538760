#pragma once

// The value ring A = Z[L, L^-1, 1/(1 - L^-i)] (with rational coefficients),
// its specializations L -> q, and the order "nonnegative for all q > 1".
//
// Normal form: L^shift * P(L) / prod_i (1 - L^-i)^{m_i} with P(0) != 0.
// Writing the denominator as a product of cyclotomic polynomials, every
// cyclotomic factor shared with P is cancelled; the remaining cyclotomic
// exponent profile is then covered greedily by the factors (1 - L^-i),
// largest i first. Equal elements have identical normal forms.

#include <map>
#include <string>
#include <string_view>

#include "dpcalc/errors.hpp"
#include "dpcalc/rational.hpp"
#include "dpcalc/upoly.hpp"

namespace dpcalc {

class SymA {
 public:
  SymA() = default;
  SymA(const Rational& c);  // NOLINT(implicit)
  SymA(long c) : SymA(Rational(c)) {}  // NOLINT(implicit)

  static SymA L();
  static SymA L_pow(long k);
  /// (1 - L^-i)^-m
  static SymA inv_one_minus_L_pow(unsigned i, unsigned m = 1);
  /// L^shift * P(L) / prod (1 - L^-i)^{m_i}, normalized.
  static SymA from_parts(long shift, UPoly numerator, const std::map<unsigned, unsigned>& den);
  /// Inverse of str(); also accepts any expression in L, rationals, + - * / ^ and
  /// parentheses where every divisor is a unit of A.
  static SymA parse(std::string_view text);

  bool is_zero() const { return num_.is_zero(); }
  long shift() const { return shift_; }
  const UPoly& numerator() const { return num_; }
  const std::map<unsigned, unsigned>& denominator() const { return den_; }
  /// Is this a rational constant, and which.
  bool is_constant() const { return den_.empty() && num_.degree() <= 0 && (is_zero() || shift_ == 0); }

  friend SymA operator+(const SymA& a, const SymA& b);
  friend SymA operator-(const SymA& a, const SymA& b);
  friend SymA operator-(const SymA& a);
  friend SymA operator*(const SymA& a, const SymA& b);
  SymA& operator+=(const SymA& b) { return *this = *this + b; }
  SymA& operator*=(const SymA& b) { return *this = *this * b; }
  friend bool operator==(const SymA& a, const SymA& b) = default;

  /// Canonical text, e.g. "(1 - L^-1)/(1 - L^-4)".
  std::string str() const;

 private:
  long shift_ = 0;
  UPoly num_;
  std::map<unsigned, unsigned> den_;
};

SymA a_add(const SymA& x, const SymA& y);
SymA a_mul(const SymA& x, const SymA& y);
SymA a_neg(const SymA& x);
/// x / d for d a unit of A (c * L^k * product of cyclotomic polynomials in L
/// times any denominator); NotInvertibleInA otherwise.
SymA a_div_by_unit(const SymA& x, const SymA& d);
bool is_unit(const SymA& d);
/// x^e, e < 0 allowed for units.
SymA a_pow(const SymA& x, long e);

/// The specialization L -> q; q must exceed 1.
Rational nu_q(const SymA& x, const Rational& q);

/// nu_q(x) >= 0 for every real q > 1 (decided with Sturm sequences).
bool is_nonneg(const SymA& x);

/// Cleared numerator: the polynomial whose sign on (1, oo) is that of x.
UPoly sign_polynomial(const SymA& x);

}  // namespace dpcalc
