#include "dpcalc/localfield.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace dpcalc::lf {

namespace {

using Digits = std::vector<std::uint32_t>;  // coefficient of ϖ^i at index i

struct Ring {
  FieldKind kind;
  std::uint32_t p;
};

Integer to_integer(const Digits& d, std::uint32_t p) {
  Integer z = 0;
  for (auto it = d.rbegin(); it != d.rend(); ++it) z = z * p + *it;
  return z;
}

Digits to_digits(Integer z, std::uint32_t p, std::size_t k) {
  Digits out(k, 0);
  Integer m = ipow(p, k);
  mpz_fdiv_r(z.get_mpz_t(), z.get_mpz_t(), m.get_mpz_t());
  for (std::size_t i = 0; i < k && z != 0; ++i)
    out[i] = static_cast<std::uint32_t>(mpz_fdiv_q_ui(z.get_mpz_t(), z.get_mpz_t(), p));
  return out;
}

std::uint32_t inverse_mod_p(std::uint32_t a, std::uint32_t p) {
  Integer r, aa = a, pp = p;
  mpz_invert(r.get_mpz_t(), aa.get_mpz_t(), pp.get_mpz_t());
  return static_cast<std::uint32_t>(r.get_ui());
}

Digits ring_add(const Ring& R, const Digits& a, const Digits& b) {
  const std::size_t k = a.size();
  Digits out(k, 0);
  if (R.kind == FieldKind::EqualChar) {
    for (std::size_t i = 0; i < k; ++i) out[i] = static_cast<std::uint32_t>((std::uint64_t{a[i]} + b[i]) % R.p);
    return out;
  }
  std::uint64_t carry = 0;
  for (std::size_t i = 0; i < k; ++i) {
    std::uint64_t s = std::uint64_t{a[i]} + b[i] + carry;
    out[i] = static_cast<std::uint32_t>(s % R.p);
    carry = s / R.p;
  }
  return out;
}

Digits ring_neg(const Ring& R, const Digits& a) {
  Digits out(a.size(), 0);
  if (R.kind == FieldKind::EqualChar) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] == 0 ? 0 : R.p - a[i];
    return out;
  }
  std::size_t i = 0;
  while (i < a.size() && a[i] == 0) ++i;
  if (i == a.size()) return out;
  out[i] = R.p - a[i];
  for (std::size_t j = i + 1; j < a.size(); ++j) out[j] = R.p - 1 - a[j];
  return out;
}

Digits ring_mul(const Ring& R, const Digits& a, const Digits& b) {
  const std::size_t k = a.size();
  if (R.kind == FieldKind::CharZero) return to_digits(to_integer(a, R.p) * to_integer(b, R.p), R.p, k);
  Digits out(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (a[i] == 0) continue;
    for (std::size_t j = 0; i + j < k; ++j)
      out[i + j] = static_cast<std::uint32_t>((out[i + j] + std::uint64_t{a[i]} * b[j]) % R.p);
  }
  return out;
}

// a must be a unit (a[0] != 0).
Digits ring_inv(const Ring& R, const Digits& a) {
  const std::size_t k = a.size();
  if (R.kind == FieldKind::CharZero) {
    Integer m = ipow(R.p, k), z = to_integer(a, R.p), r;
    mpz_invert(r.get_mpz_t(), z.get_mpz_t(), m.get_mpz_t());
    return to_digits(r, R.p, k);
  }
  Digits b(k, 0);
  const std::uint32_t b0 = inverse_mod_p(a[0], R.p);
  b[0] = b0;
  for (std::size_t n = 1; n < k; ++n) {
    std::uint64_t s = 0;
    for (std::size_t i = 1; i <= n; ++i) s = (s + std::uint64_t{a[i]} * b[n - i]) % R.p;
    b[n] = static_cast<std::uint32_t>((R.p - s) % R.p * b0 % R.p);
  }
  return b;
}

void strip_high_zeros(Digits& d) {
  while (!d.empty() && d.back() == 0) d.pop_back();
}

ExtInt abs_prec(const LFElem& a) { return a.absolute_precision(); }

}  // namespace

struct Access {
  static LFElem blank(const LocalFieldSpec& f) {
    LFElem e;
    e.field_ = f;
    return e;
  }

  static LFElem exact_q(const LocalFieldSpec& f, const Rational& q) {
    LFElem e = blank(f);
    e.exact_ = true;
    if (q == 0) {
      e.zero_ = true;
      return e;
    }
    e.rational_ = q;
    e.val_ = valuation(q, f.prime);
    e.digits_ = e.unit_digits(static_cast<std::size_t>(f.precision));
    return e;
  }

  static LFElem exact_s(const LocalFieldSpec& f, long val, Digits unit) {
    LFElem e = blank(f);
    e.exact_ = true;
    std::size_t lead = 0;
    while (lead < unit.size() && unit[lead] == 0) ++lead;
    if (lead == unit.size()) {
      e.zero_ = true;
      return e;
    }
    unit.erase(unit.begin(), unit.begin() + static_cast<long>(lead));
    strip_high_zeros(unit);
    e.val_ = val + static_cast<long>(lead);
    e.series_ = std::move(unit);
    e.digits_ = e.unit_digits(static_cast<std::size_t>(f.precision));
    return e;
  }

  // Value Σ d[i] ϖ^{base+i} known modulo ϖ^{base+d.size()}.
  static LFElem inexact(const LocalFieldSpec& f, long base, const Digits& d) {
    LFElem e = blank(f);
    std::size_t lead = 0;
    while (lead < d.size() && d[lead] == 0) ++lead;
    if (lead == d.size()) {
      e.val_ = base + static_cast<long>(d.size());
      return e;
    }
    e.val_ = base + static_cast<long>(lead);
    std::size_t n = std::min(d.size() - lead, static_cast<std::size_t>(f.precision));
    e.digits_.assign(d.begin() + static_cast<long>(lead), d.begin() + static_cast<long>(lead + n));
    return e;
  }

  static long val(const LFElem& e) { return e.val_; }
  static const Digits& series(const LFElem& e) { return e.series_; }
};

// ---------------------------------------------------------------------------

void LocalFieldSpec::validate() const {
  if (!is_prime(prime)) throw InvalidPrime(std::to_string(prime) + " is not prime");
  if (precision < 1) throw std::invalid_argument("precision must be >= 1");
}

std::string LocalFieldSpec::name() const {
  return kind == FieldKind::CharZero ? "Q_" + std::to_string(prime) : "F_" + std::to_string(prime) + "((t))";
}

std::int64_t ExtInt::value() const {
  if (inf_) throw std::domain_error("ExtInt: value of +inf");
  return value_;
}

LFElem LFElem::zero(const LocalFieldSpec& field) { return Access::exact_q(field, 0); }

LFElem LFElem::uniformizer(const LocalFieldSpec& field) {
  field.validate();
  if (field.kind == FieldKind::CharZero) return Access::exact_q(field, Rational(field.prime));
  return Access::exact_s(field, 1, {1});
}

LFElem LFElem::exact_series(const LocalFieldSpec& field, long valuation, std::vector<std::uint32_t> unit) {
  if (field.kind != FieldKind::EqualChar) throw std::invalid_argument("exact_series: field is not F_p((t))");
  for (auto& d : unit) d %= field.prime;
  return Access::exact_s(field, valuation, std::move(unit));
}

LFElem LFElem::residue_box(const LocalFieldSpec& field, std::span<const std::uint32_t> low_digits) {
  Digits d(low_digits.begin(), low_digits.end());
  for (auto x : d)
    if (x >= field.prime) throw std::invalid_argument("residue_box: digit out of range");
  return Access::inexact(field, 0, d);
}

LFElem LFElem::approximate(const LocalFieldSpec& field, long valuation, std::vector<std::uint32_t> digits) {
  for (auto x : digits)
    if (x >= field.prime) throw std::invalid_argument("approximate: digit out of range");
  return Access::inexact(field, valuation, digits);
}

ExtInt LFElem::valuation() const {
  if (exact_ && zero_) return ExtInt::infinity();
  return val_;
}

ExtInt LFElem::absolute_precision() const {
  if (exact_) return ExtInt::infinity();
  return val_ + static_cast<long>(digits_.size());
}

std::vector<std::uint32_t> LFElem::unit_digits(std::size_t k) const {
  if (exact_ && zero_) throw std::domain_error("unit_digits of zero");
  if (!exact_) {
    if (k > digits_.size()) throw PrecisionExhausted("requested " + std::to_string(k) + " digits, " +
                                                     std::to_string(digits_.size()) + " known");
    return {digits_.begin(), digits_.begin() + static_cast<long>(k)};
  }
  if (field_.kind == FieldKind::EqualChar) {
    Digits out(k, 0);
    std::copy_n(series_.begin(), std::min(k, series_.size()), out.begin());
    return out;
  }
  // u = num/den with both prime to p after removing p^val.
  const unsigned long p = field_.prime;
  Integer num = rational_->get_num(), den = rational_->get_den();
  if (val_ > 0) mpz_divexact(num.get_mpz_t(), num.get_mpz_t(), ipow(p, static_cast<unsigned long>(val_)).get_mpz_t());
  if (val_ < 0) mpz_divexact(den.get_mpz_t(), den.get_mpz_t(), ipow(p, static_cast<unsigned long>(-val_)).get_mpz_t());
  Integer m = ipow(p, k), dinv;
  mpz_invert(dinv.get_mpz_t(), den.get_mpz_t(), m.get_mpz_t());
  return to_digits(num * dinv, field_.prime, k);
}

std::string LFElem::str() const {
  std::ostringstream os;
  os << field_.name() << ":";
  if (is_exact_zero()) return os.str() + " 0 (exact)";
  if (!determined()) {
    os << " O(" << field_.prime << "^" << val_ << ")";
    return os.str();
  }
  os << " ord=" << val_ << " digits=[";
  for (std::size_t i = 0; i < digits_.size(); ++i) os << (i ? "," : "") << digits_[i];
  os << "]" << (exact_ ? " (exact)" : "");
  return os.str();
}

LFElem embed_rational(const Rational& r, const LocalFieldSpec& field) {
  field.validate();
  if (field.kind == FieldKind::CharZero) return Access::exact_q(field, r);
  const unsigned long p = field.prime;
  if (mpz_divisible_ui_p(r.get_den_mpz_t(), p))
    throw NotPIntegral(to_string(r) + " has a denominator divisible by " + std::to_string(p));
  Integer num = r.get_num(), den = r.get_den(), pp = p, inv;
  mpz_invert(inv.get_mpz_t(), den.get_mpz_t(), pp.get_mpz_t());
  Integer res = num * inv;
  mpz_fdiv_r_ui(res.get_mpz_t(), res.get_mpz_t(), p);
  return Access::exact_s(field, 0, {static_cast<std::uint32_t>(res.get_ui())});
}

// ---------------------------------------------------------------------------
// truncated arithmetic

namespace trunc {

namespace {

void require_same_field(const LFElem& a, const LFElem& b) {
  if (!(a.field() == b.field())) throw std::invalid_argument("mixing elements of " + a.field().name() + " and " + b.field().name());
}

Digits series_combine(std::uint32_t p, long va, const Digits& a, long vb, const Digits& b, bool subtract, long& base) {
  base = std::min(va, vb);
  std::size_t len = std::max(a.size() + static_cast<std::size_t>(va - base), b.size() + static_cast<std::size_t>(vb - base));
  Digits out(len, 0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i + static_cast<std::size_t>(va - base)] = a[i];
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto& o = out[i + static_cast<std::size_t>(vb - base)];
    std::uint32_t x = subtract ? (b[i] == 0 ? 0 : p - b[i]) : b[i];
    o = static_cast<std::uint32_t>((std::uint64_t{o} + x) % p);
  }
  return out;
}

}  // namespace

LFElem add(const LFElem& a, const LFElem& b) {
  require_same_field(a, b);
  const auto& f = a.field();
  if (a.is_exact_zero()) return b;
  if (b.is_exact_zero()) return a;
  if (a.exact() && b.exact()) {
    if (f.kind == FieldKind::CharZero) return Access::exact_q(f, *a.exact_rational() + *b.exact_rational());
    long base = 0;
    Digits s = series_combine(f.prime, Access::val(a), Access::series(a), Access::val(b), Access::series(b), false, base);
    return Access::exact_s(f, base, std::move(s));
  }
  const std::int64_t A = std::min(abs_prec(a), abs_prec(b)).value();
  const long v0 = std::min(Access::val(a), Access::val(b));
  if (A <= v0) return Access::inexact(f, A, {});
  const auto len = static_cast<std::size_t>(A - v0);
  Ring R{f.kind, f.prime};
  auto place = [&](const LFElem& x) {
    Digits d(len, 0);
    if (!x.determined() || Access::val(x) >= A) return d;
    auto ud = x.unit_digits(static_cast<std::size_t>(A - Access::val(x)));
    std::copy(ud.begin(), ud.end(), d.begin() + (Access::val(x) - v0));
    return d;
  };
  return Access::inexact(f, v0, ring_add(R, place(a), place(b)));
}

LFElem neg(const LFElem& a) {
  const auto& f = a.field();
  if (a.is_exact_zero()) return a;
  if (a.exact()) {
    if (f.kind == FieldKind::CharZero) return Access::exact_q(f, -*a.exact_rational());
    return Access::exact_s(f, Access::val(a), ring_neg(Ring{f.kind, f.prime}, Access::series(a)));
  }
  if (!a.determined()) return a;
  return Access::inexact(f, Access::val(a), ring_neg(Ring{f.kind, f.prime}, a.digits()));
}

LFElem sub(const LFElem& a, const LFElem& b) { return trunc::add(a, trunc::neg(b)); }

LFElem mul(const LFElem& a, const LFElem& b) {
  require_same_field(a, b);
  const auto& f = a.field();
  if (a.is_exact_zero()) return a;
  if (b.is_exact_zero()) return b;
  if (a.exact() && b.exact()) {
    if (f.kind == FieldKind::CharZero) return Access::exact_q(f, *a.exact_rational() * *b.exact_rational());
    const Digits& x = Access::series(a);
    const Digits& y = Access::series(b);
    Digits out(x.size() + y.size() - 1, 0);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < y.size(); ++j)
        out[i + j] = static_cast<std::uint32_t>((out[i + j] + std::uint64_t{x[i]} * y[j]) % f.prime);
    return Access::exact_s(f, Access::val(a) + Access::val(b), std::move(out));
  }
  const long v = Access::val(a) + Access::val(b);
  if (!a.determined() || !b.determined()) return Access::inexact(f, v, {});
  std::size_t k = static_cast<std::size_t>(f.precision);
  if (!a.exact()) k = std::min(k, a.digits().size());
  if (!b.exact()) k = std::min(k, b.digits().size());
  return Access::inexact(f, v, ring_mul(Ring{f.kind, f.prime}, a.unit_digits(k), b.unit_digits(k)));
}

LFElem pow(const LFElem& a, unsigned e) {
  LFElem acc = a.field().kind == FieldKind::CharZero ? Access::exact_q(a.field(), 1) : Access::exact_s(a.field(), 0, {1});
  LFElem base = a;
  while (e) {
    if (e & 1u) acc = trunc::mul(acc, base);
    e >>= 1u;
    if (e) base = trunc::mul(base, base);
  }
  return acc;
}

std::pair<ExtInt, ExtInt> ord_bounds(const LFElem& a) {
  if (a.is_exact_zero()) return {ExtInt::infinity(), ExtInt::infinity()};
  if (!a.determined()) return {a.valuation(), ExtInt::infinity()};
  return {a.valuation(), a.valuation()};
}

std::optional<std::uint32_t> ac_if_known(const LFElem& a) {
  if (a.is_exact_zero()) return 0u;
  if (!a.determined()) return std::nullopt;
  return a.digits().front();
}

}  // namespace trunc

// ---------------------------------------------------------------------------
// checked arithmetic

namespace {
LFElem checked(LFElem r, const char* op) {
  if (!r.determined()) throw PrecisionExhausted(std::string(op) + ": no significant digit of the result is determined");
  return r;
}
}  // namespace

LFElem add(const LFElem& a, const LFElem& b) { return checked(trunc::add(a, b), "add"); }
LFElem sub(const LFElem& a, const LFElem& b) { return checked(trunc::sub(a, b), "sub"); }
LFElem mul(const LFElem& a, const LFElem& b) { return checked(trunc::mul(a, b), "mul"); }
LFElem neg(const LFElem& a) { return checked(trunc::neg(a), "neg"); }

LFElem inv(const LFElem& a) {
  const auto& f = a.field();
  if (a.is_exact_zero()) throw DivisionByZero("inv(0)");
  if (!a.determined()) throw PrecisionExhausted("inv: valuation of the argument is not determined");
  if (a.exact()) {
    if (f.kind == FieldKind::CharZero) return Access::exact_q(f, 1 / *a.exact_rational());
    const Digits& s = Access::series(a);
    if (s.size() == 1) return Access::exact_s(f, -Access::val(a), {inverse_mod_p(s[0], f.prime)});
    auto k = static_cast<std::size_t>(f.precision);
    return Access::inexact(f, -Access::val(a), ring_inv(Ring{f.kind, f.prime}, a.unit_digits(k)));
  }
  return Access::inexact(f, -Access::val(a), ring_inv(Ring{f.kind, f.prime}, a.digits()));
}

ExtInt ord(const LFElem& a) {
  if (a.is_exact_zero()) return ExtInt::infinity();
  if (!a.determined()) throw PrecisionExhausted("ord: element is only known to be O(ϖ^" + a.valuation().str() + ")");
  return a.valuation();
}

std::uint32_t ac(const LFElem& a) {
  if (a.is_exact_zero()) return 0;
  if (!a.determined()) throw PrecisionExhausted("ac: leading digit not determined");
  return a.digits().front();
}

// ---------------------------------------------------------------------------
// Hensel

LFElem evaluate_poly(const std::vector<Integer>& coeffs, const LFElem& y) {
  const auto& f = y.field();
  LFElem acc = LFElem::zero(f);
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
    acc = trunc::add(trunc::mul(acc, y), embed_rational(Rational(*it), f));
  return acc;
}

LFElem hensel_lift(const std::vector<Integer>& coeffs, std::uint32_t x0, const LocalFieldSpec& field) {
  field.validate();
  const std::uint32_t p = field.prime;
  const Ring R{field.kind, p};
  auto reduce = [p](const Integer& c) {
    Integer r;
    mpz_fdiv_r_ui(r.get_mpz_t(), c.get_mpz_t(), p);
    return static_cast<std::uint32_t>(r.get_ui());
  };
  // f and f' reduced mod ϖ^k, evaluated at y (k = y.size()) by Horner.
  auto eval = [&](const Digits& y, bool derivative) {
    const std::size_t k = y.size();
    Digits acc(k, 0);
    const std::size_t deg = coeffs.size();
    for (std::size_t i = deg; i-- > (derivative ? 1u : 0u);) {
      Integer c = derivative ? coeffs[i] * static_cast<unsigned long>(i) : coeffs[i];
      Digits cd;
      if (field.kind == FieldKind::CharZero) {
        cd = to_digits(c, p, k);
      } else {
        cd.assign(k, 0);
        cd[0] = reduce(c);
      }
      acc = ring_add(R, ring_mul(R, acc, y), cd);
    }
    return acc;
  };
  Digits y{x0 % p};
  if (eval(y, false)[0] != 0)
    throw NoSimpleRoot("f(" + std::to_string(x0) + ") is not 0 mod " + std::to_string(p));
  if (eval(y, true)[0] == 0)
    throw NoSimpleRoot("f'(" + std::to_string(x0) + ") vanishes mod " + std::to_string(p));
  const auto target = static_cast<std::size_t>(field.precision);
  std::size_t prec = 1;
  while (prec < target) {
    prec = std::min(2 * prec, target);
    y.resize(prec, 0);
    Digits fy = eval(y, false);
    Digits dfy = eval(y, true);
    y = ring_add(R, y, ring_neg(R, ring_mul(R, fy, ring_inv(R, dfy))));
  }
  y.resize(target, 0);
  return Access::inexact(field, 0, y);
}

}  // namespace dpcalc::lf
