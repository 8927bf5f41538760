#pragma once

// Precision-budgeted arithmetic in Q_p and F_p((t)).
//
// An LFElem is either exact (the image of a rational, or a finite Laurent
// polynomial in t over F_p) or known modulo ϖ^A for some absolute precision
// A. Inexact elements whose digits are all undetermined ("indeterminate")
// only carry the bound ord >= A; the public arithmetic refuses to produce
// them, while the truncated variants in namespace `trunc` propagate them.

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpcalc/errors.hpp"
#include "dpcalc/rational.hpp"

namespace dpcalc::lf {

enum class FieldKind { CharZero, EqualChar };

struct LocalFieldSpec {
  FieldKind kind = FieldKind::CharZero;
  std::uint32_t prime = 2;
  int precision = 1;  ///< number of significant digits tracked

  static LocalFieldSpec qp(std::uint32_t p, int n) { return {FieldKind::CharZero, p, n}; }
  static LocalFieldSpec fpt(std::uint32_t p, int n) { return {FieldKind::EqualChar, p, n}; }

  /// Throws InvalidPrime / std::invalid_argument.
  void validate() const;
  std::string name() const;  // "Q_7" or "F_7((t))"

  friend bool operator==(const LocalFieldSpec&, const LocalFieldSpec&) = default;
};

/// Integers extended by +∞ as maximum.
class ExtInt {
 public:
  constexpr ExtInt(std::int64_t v = 0) : value_(v), inf_(false) {}  // NOLINT(implicit)
  static constexpr ExtInt infinity() {
    ExtInt e;
    e.inf_ = true;
    return e;
  }
  constexpr bool is_infinite() const { return inf_; }
  /// Throws std::domain_error on +∞.
  std::int64_t value() const;

  friend constexpr bool operator==(const ExtInt& a, const ExtInt& b) {
    return a.inf_ == b.inf_ && (a.inf_ || a.value_ == b.value_);
  }
  friend constexpr std::strong_ordering operator<=>(const ExtInt& a, const ExtInt& b) {
    if (a.inf_ || b.inf_) return static_cast<int>(a.inf_) <=> static_cast<int>(b.inf_);
    return a.value_ <=> b.value_;
  }
  std::string str() const { return inf_ ? "inf" : std::to_string(value_); }

 private:
  std::int64_t value_;
  bool inf_;
};

class LFElem {
 public:
  static LFElem zero(const LocalFieldSpec& field);
  /// ϖ = p in Q_p, ϖ = t in F_p((t)); exact.
  static LFElem uniformizer(const LocalFieldSpec& field);
  /// Exact element of F_p((t)) given by ϖ^valuation * Σ unit[i] t^i.
  static LFElem exact_series(const LocalFieldSpec& field, long valuation, std::vector<std::uint32_t> unit);
  /// The residue box Σ_{i<abs_precision} low_digits[i] ϖ^i + O(ϖ^abs_precision).
  /// `low_digits` holds the coefficients of ϖ^0 .. ϖ^{abs_precision-1}.
  static LFElem residue_box(const LocalFieldSpec& field, std::span<const std::uint32_t> low_digits);
  /// Inexact element ϖ^valuation * Σ digits[i] ϖ^i + O(ϖ^{valuation+digits.size()}).
  /// With empty digits this is the indeterminate element O(ϖ^valuation).
  static LFElem approximate(const LocalFieldSpec& field, long valuation, std::vector<std::uint32_t> digits);

  const LocalFieldSpec& field() const { return field_; }
  bool exact() const { return exact_; }
  bool is_exact_zero() const { return exact_ && zero_; }
  /// True when the valuation is known (exact, or at least one significant digit).
  bool determined() const { return exact_ || !digits_.empty(); }

  /// +∞ for zero; for indeterminate elements this is only a lower bound.
  ExtInt valuation() const;
  /// +∞ when exact.
  ExtInt absolute_precision() const;
  /// Significant digits, leading digit first. At most field().precision entries.
  const std::vector<std::uint32_t>& digits() const { return digits_; }
  /// First k digits of the unit part; exact elements re-expand to any k.
  std::vector<std::uint32_t> unit_digits(std::size_t k) const;

  /// Exact value in Q (CharZero exact elements only).
  const std::optional<Rational>& exact_rational() const { return rational_; }

  std::string str() const;

 private:
  friend struct Access;
  LFElem() = default;

  LocalFieldSpec field_;
  bool exact_ = false;
  bool zero_ = false;
  long val_ = 0;                          // valuation, or lower bound when indeterminate
  std::vector<std::uint32_t> digits_;     // significant digits (view, <= precision)
  std::optional<Rational> rational_;      // CharZero exact payload
  std::vector<std::uint32_t> series_;     // EqualChar exact payload: full unit part
};

/// Image of a rational number. In F_p((t)) the rational is reduced mod p and
/// must be p-integral (NotPIntegral otherwise).
LFElem embed_rational(const Rational& r, const LocalFieldSpec& field);

// Checked arithmetic. Throws PrecisionExhausted when no significant digit of
// the result is determined, DivisionByZero for inv(0).
LFElem add(const LFElem& a, const LFElem& b);
LFElem sub(const LFElem& a, const LFElem& b);
LFElem mul(const LFElem& a, const LFElem& b);
LFElem neg(const LFElem& a);
LFElem inv(const LFElem& a);

/// ord(0) = +∞. Throws PrecisionExhausted for indeterminate elements.
ExtInt ord(const LFElem& a);
/// Leading digit; ac(0) = 0. Throws PrecisionExhausted for indeterminate elements.
std::uint32_t ac(const LFElem& a);

// Truncated arithmetic: never throws on precision loss, returns the
// indeterminate element instead. Used by the formula interpreter.
namespace trunc {
LFElem add(const LFElem& a, const LFElem& b);
LFElem sub(const LFElem& a, const LFElem& b);
LFElem mul(const LFElem& a, const LFElem& b);
LFElem neg(const LFElem& a);
LFElem pow(const LFElem& a, unsigned e);
/// [lo, hi] bracket of ord; hi = +∞ for indeterminate elements.
std::pair<ExtInt, ExtInt> ord_bounds(const LFElem& a);
/// nullopt when the leading digit is not determined.
std::optional<std::uint32_t> ac_if_known(const LFElem& a);
}  // namespace trunc

/// Simple-root Newton lift of x0 to a root of f modulo ϖ^precision.
/// `coeffs[i]` is the coefficient of x^i. Throws NoSimpleRoot unless
/// f(x0) ≡ 0 and f'(x0) ≢ 0 mod p.
LFElem hensel_lift(const std::vector<Integer>& coeffs, std::uint32_t x0, const LocalFieldSpec& field);

/// f(y) evaluated with truncated arithmetic; helper for checking lifts.
LFElem evaluate_poly(const std::vector<Integer>& coeffs, const LFElem& y);

}  // namespace dpcalc::lf
