#pragma once

// Iterated (triangular) Presburger domains and exact summation of
// L-exponential terms over them.
//
// A sum may leave free integer parameters behind (variables mentioned in the
// bounds or the exponent that the domain does not sum over). Such values are
// PresValues: finite sums of SymA coefficients times L raised to a linear form
// in the parameters.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpcalc/symring.hpp"

namespace dpcalc::pres {

using Assignment = std::map<std::string, std::int64_t>;

class AffineForm {
 public:
  AffineForm(std::int64_t c = 0) : constant_(c) {}  // NOLINT(implicit)
  static AffineForm var(const std::string& name, std::int64_t coeff = 1);
  /// "2*k + 1", "g - k", "-3", ...
  static AffineForm parse(std::string_view text);

  std::int64_t constant() const { return constant_; }
  const std::map<std::string, std::int64_t>& coeffs() const { return coeffs_; }
  std::int64_t coeff(const std::string& v) const;
  bool is_constant() const { return coeffs_.empty(); }
  bool mentions(const std::string& v) const { return coeffs_.count(v) > 0; }
  AffineForm linear_part() const;

  /// Replace variable v by the form f.
  AffineForm substitute(const std::string& v, const AffineForm& f) const;
  /// Value under an assignment; UnboundParameter if a variable is missing.
  std::int64_t eval(const Assignment& a) const;
  /// Assign the variables that appear in `a`, keep the others symbolic.
  AffineForm partial_eval(const Assignment& a) const;

  friend AffineForm operator+(const AffineForm& a, const AffineForm& b);
  friend AffineForm operator-(const AffineForm& a, const AffineForm& b);
  friend AffineForm operator-(const AffineForm& a);
  friend AffineForm operator*(std::int64_t s, const AffineForm& a);
  friend bool operator==(const AffineForm&, const AffineForm&) = default;
  friend auto operator<=>(const AffineForm&, const AffineForm&) = default;

  std::string str() const;

 private:
  void normalize();
  std::int64_t constant_;
  std::map<std::string, std::int64_t> coeffs_;
};

struct VarRange {
  std::string name;
  std::optional<AffineForm> lower;  // nullopt: -oo
  std::optional<AffineForm> upper;  // nullopt: +oo
  std::int64_t modulus = 1;
  std::int64_t residue = 0;
};

/// Variables in iteration order: bounds of a variable may mention earlier
/// variables and free parameters only.
struct PresDomain {
  std::vector<VarRange> vars;

  void validate() const;
  bool contains(const Assignment& point) const;
  std::vector<std::string> names() const;
};

struct PresTerm {
  SymA coeff;
  AffineForm exponent;
};

class PresValue {
 public:
  PresValue() = default;
  PresValue(const SymA& c);  // NOLINT(implicit)
  explicit PresValue(const PresTerm& t);
  /// coeff * L^exponent
  PresValue(const SymA& coeff, const AffineForm& exponent);

  bool is_zero() const { return terms_.empty(); }
  /// True when no parameter remains.
  bool is_closed() const;
  /// The SymA value; throws UnboundParameter when parameters remain.
  SymA closed() const;
  std::vector<std::string> parameters() const;

  /// Key: linear part of the exponent (no constant); value: coefficient.
  const std::map<AffineForm, SymA>& terms() const { return terms_; }

  SymA evaluate(const Assignment& params) const;
  Rational nu_q(const Assignment& params, const Rational& q) const;
  PresValue substitute(const std::string& v, const AffineForm& f) const;
  PresValue partial_eval(const Assignment& a) const;

  friend PresValue operator+(const PresValue& a, const PresValue& b);
  friend PresValue operator-(const PresValue& a);
  friend PresValue operator-(const PresValue& a, const PresValue& b) { return a + (-b); }
  friend PresValue operator*(const PresValue& a, const PresValue& b);
  friend bool operator==(const PresValue&, const PresValue&) = default;

  /// "c1*L^(k) + c2*L^(-2*k)" style; closed values print as their SymA.
  std::string str() const;

 private:
  void add_term(const AffineForm& lin, const SymA& c);
  std::map<AffineForm, SymA> terms_;
};

/// Σ over the domain of the integrand, innermost variable first.
/// NotSummable when an unbounded direction does not decay;
/// UnsupportedDomain for shapes outside the triangular fragment.
PresValue sum(const PresDomain& domain, const PresValue& integrand);
PresValue sum(const PresDomain& domain, const PresTerm& term);

/// Sum over pieces asserted disjoint. One-variable pieces are checked.
PresValue sum_piecewise(const std::vector<std::pair<PresDomain, PresTerm>>& pieces);

struct TruncatedSum {
  Rational partial;
  /// Bound on |full sum - partial|; nullopt when the bounding relaxation diverges.
  std::optional<Rational> tail_bound;
};

/// Partial sum of ν_q(term) over domain points with |coordinates| <= cutoff;
/// the tail bound sums the term over a product box containing the domain.
TruncatedSum evaluate_truncated(const PresDomain& domain, const PresTerm& term, const Rational& q,
                                std::int64_t cutoff, const Assignment& params = {});

}  // namespace dpcalc::pres
