#include "dpcalc/symring.hpp"

#include <cctype>
#include <stdexcept>

#include "dpcalc/sturm.hpp"

namespace dpcalc {

namespace {

using Profile = std::map<unsigned, unsigned>;  // d -> exponent of Phi_d

std::vector<unsigned> divisors(unsigned n) {
  std::vector<unsigned> out;
  for (unsigned d = 1; d <= n; ++d)
    if (n % d == 0) out.push_back(d);
  return out;
}

struct Cover {
  std::map<unsigned, unsigned> den;  // i -> multiplicity of (L^i - 1)
  UPoly surplus = UPoly::constant(1);  // prod (L^i - 1)^{m_i} = prod Phi^{profile} * surplus
  long weight = 0;                     // Σ i * m_i
};

// Cover a cyclotomic profile by factors L^i - 1, largest index first.
Cover cover_profile(const Profile& e) {
  Cover c;
  Profile covered;
  for (auto it = e.rbegin(); it != e.rend(); ++it) {
    const unsigned d = it->first;
    const unsigned have = covered.count(d) ? covered[d] : 0;
    if (it->second <= have) continue;
    const unsigned need = it->second - have;
    c.den[d] += need;
    c.weight += static_cast<long>(d) * need;
    for (unsigned k : divisors(d)) covered[k] += need;
  }
  for (const auto& [d, k] : covered) {
    const unsigned want = e.count(d) ? e.at(d) : 0;
    if (k > want) c.surplus = c.surplus * pow(cyclotomic(d), k - want);
  }
  return c;
}

bool divides(const UPoly& f, const UPoly& p) { return (p % f).is_zero(); }

// Strip every cyclotomic factor from p; returns the remaining cofactor.
UPoly strip_cyclotomics(UPoly p, Profile& found) {
  const long bound = 2 * p.degree() * p.degree() + 2;
  for (unsigned d = 1; p.degree() > 0 && d <= static_cast<unsigned>(bound); ++d) {
    const UPoly& phi = cyclotomic(d);
    if (phi.degree() > p.degree()) continue;
    while (p.degree() >= phi.degree() && divides(phi, p)) {
      p = exact_div(p, phi);
      ++found[d];
    }
  }
  return p;
}

}  // namespace

SymA::SymA(const Rational& c) {
  if (c != 0) num_ = UPoly::constant(c);
}

SymA SymA::L() { return L_pow(1); }

SymA SymA::L_pow(long k) {
  SymA a(1);
  a.shift_ = k;
  return a;
}

SymA SymA::inv_one_minus_L_pow(unsigned i, unsigned m) {
  if (i == 0) throw std::invalid_argument("1 - L^0 is not invertible");
  if (m == 0) return SymA(1);
  return from_parts(0, UPoly::constant(1), {{i, m}});
}

SymA SymA::from_parts(long shift, UPoly p, const std::map<unsigned, unsigned>& den) {
  SymA out;
  if (p.is_zero()) return out;
  const std::size_t lo = p.low_order();
  p = p.shift_down(lo);
  shift += static_cast<long>(lo);

  // 1/(1 - L^-i) = L^i / (L^i - 1)
  Profile e;
  for (const auto& [i, m] : den) {
    if (i == 0) throw std::invalid_argument("denominator factor 1 - L^0");
    if (m == 0) continue;
    shift += static_cast<long>(i) * m;
    for (unsigned d : divisors(i)) e[d] += m;
  }
  for (auto it = e.rbegin(); it != e.rend(); ++it) {
    const UPoly& phi = cyclotomic(it->first);
    while (it->second > 0 && p.degree() >= phi.degree() && divides(phi, p)) {
      p = exact_div(p, phi);
      --it->second;
    }
  }
  std::erase_if(e, [](const auto& kv) { return kv.second == 0; });

  Cover c = cover_profile(e);
  out.num_ = p * c.surplus;
  out.shift_ = shift - c.weight;
  out.den_ = std::move(c.den);
  return out;
}

SymA operator*(const SymA& a, const SymA& b) {
  if (a.is_zero() || b.is_zero()) return {};
  std::map<unsigned, unsigned> den = a.den_;
  for (const auto& [i, m] : b.den_) den[i] += m;
  return SymA::from_parts(a.shift_ + b.shift_, a.num_ * b.num_, den);
}

SymA operator+(const SymA& a, const SymA& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  std::map<unsigned, unsigned> den = a.den_;
  for (const auto& [i, m] : b.den_) den[i] = std::max(den[i], m);
  // Bring each numerator over the common denominator.
  auto lift = [&den](const SymA& x, long& shift) {
    UPoly p = x.num_;
    shift = x.shift_;
    for (const auto& [i, m] : den) {
      const unsigned have = x.den_.count(i) ? x.den_.at(i) : 0;
      if (m == have) continue;
      p = p * pow(UPoly::x_pow_minus_one(i), m - have);
      shift -= static_cast<long>(i) * (m - have);
    }
    return p;
  };
  long sa = 0, sb = 0;
  UPoly pa = lift(a, sa), pb = lift(b, sb);
  const long s = std::min(sa, sb);
  UPoly sum = pa * UPoly::monomial(1, static_cast<std::size_t>(sa - s)) + pb * UPoly::monomial(1, static_cast<std::size_t>(sb - s));
  return SymA::from_parts(s, std::move(sum), den);
}

SymA operator-(const SymA& a) {
  SymA out = a;
  out.num_ = -a.num_;
  return out;
}

SymA operator-(const SymA& a, const SymA& b) { return a + (-b); }

SymA a_add(const SymA& x, const SymA& y) { return x + y; }
SymA a_mul(const SymA& x, const SymA& y) { return x * y; }
SymA a_neg(const SymA& x) { return -x; }

bool is_unit(const SymA& d) {
  if (d.is_zero()) return false;
  Profile found;
  return strip_cyclotomics(d.numerator(), found).degree() == 0;
}

SymA a_div_by_unit(const SymA& x, const SymA& d) {
  if (d.is_zero()) throw NotInvertibleInA("division by 0");
  Profile f;
  UPoly c = strip_cyclotomics(d.numerator(), f);
  if (c.degree() != 0) throw NotInvertibleInA(d.str() + " is not a unit of A");
  // 1/d = L^-shift / c * prod (1 - L^-i)^{m_i} / prod Phi^f
  Cover cov = cover_profile(f);
  UPoly den_poly = UPoly::constant(1);
  long den_weight = 0;
  for (const auto& [i, m] : d.denominator()) {
    den_poly = den_poly * pow(UPoly::x_pow_minus_one(i), m);
    den_weight += static_cast<long>(i) * m;
  }
  SymA inverse = SymA::from_parts(-d.shift() - den_weight - cov.weight, (1 / c.lead()) * (den_poly * cov.surplus), cov.den);
  return x * inverse;
}

SymA a_pow(const SymA& x, long e) {
  SymA acc(1), base = x;
  unsigned long k = static_cast<unsigned long>(e < 0 ? -e : e);
  while (k) {
    if (k & 1u) acc = acc * base;
    k >>= 1u;
    if (k) base = base * base;
  }
  return e < 0 ? a_div_by_unit(SymA(1), acc) : acc;
}

Rational nu_q(const SymA& x, const Rational& q) {
  if (!(q > 1)) throw std::domain_error("nu_q needs q > 1, got " + q.get_str());
  if (x.is_zero()) return 0;
  Rational v = x.numerator().eval(q) * rpow(q, x.shift());
  for (const auto& [i, m] : x.denominator()) v /= rpow(1 - rpow(q, -static_cast<long>(i)), m);
  return v;
}

UPoly sign_polynomial(const SymA& x) { return x.numerator(); }

bool is_nonneg(const SymA& x) { return nonneg_on_ray(sign_polynomial(x), Rational(1)); }

// ---------------------------------------------------------------------------
// text form

std::string SymA::str() const {
  if (is_zero()) return "0";
  std::string n;
  int terms = 0;
  for (std::size_t k = num_.coeffs().size(); k-- > 0;) {
    const Rational& c = num_.coeffs()[k];
    if (c == 0) continue;
    ++terms;
    const long e = shift_ + static_cast<long>(k);
    const bool neg = c < 0;
    const Rational a = neg ? Rational(-c) : c;
    if (n.empty()) n += neg ? "-" : "";
    else n += neg ? " - " : " + ";
    std::string mono = e == 0 ? "" : (e == 1 ? "L" : "L^" + std::to_string(e));
    if (mono.empty()) n += a.get_str();
    else if (a == 1) n += mono;
    else n += a.get_str() + "*" + mono;
  }
  if (den_.empty()) return n;
  if (terms > 1) n = "(" + n + ")";
  std::string d;
  for (const auto& [i, m] : den_) {
    if (!d.empty()) d += "*";
    d += "(1 - L^-" + std::to_string(i) + ")";
    if (m > 1) d += "^" + std::to_string(m);
  }
  if (den_.size() > 1) d = "(" + d + ")";
  return n + "/" + d;
}

namespace {

class SymParser {
 public:
  explicit SymParser(std::string_view s) : s_(s) {}

  SymA parse() {
    SymA v = expr();
    skip();
    if (i_ != s_.size()) fail("unexpected '" + std::string(1, s_[i_]) + "'");
    return v;
  }

 private:
  void skip() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }
  bool eat(char c) {
    skip();
    if (i_ < s_.size() && s_[i_] == c) {
      ++i_;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw std::invalid_argument("cannot parse A-element '" + std::string(s_) + "' at offset " + std::to_string(i_) + ": " + msg);
  }

  SymA expr() {
    SymA v = term();
    for (;;) {
      if (eat('+')) v = v + term();
      else if (eat('-')) v = v - term();
      else return v;
    }
  }
  SymA term() {
    SymA v = unary();
    for (;;) {
      if (eat('*')) v = v * unary();
      else if (eat('/')) v = a_div_by_unit(v, unary());
      else return v;
    }
  }
  SymA unary() {
    if (eat('-')) return -unary();
    return power();
  }
  SymA power() {
    SymA base = atom();
    if (!eat('^')) return base;
    bool neg = eat('-');
    long e = integer();
    return a_pow(base, neg ? -e : e);
  }
  long integer() {
    skip();
    std::size_t start = i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    if (start == i_) fail("expected an integer");
    return std::stol(std::string(s_.substr(start, i_ - start)));
  }
  SymA atom() {
    skip();
    if (eat('(')) {
      SymA v = expr();
      if (!eat(')')) fail("expected ')'");
      return v;
    }
    if (eat('L')) return SymA::L();
    skip();
    std::size_t start = i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    if (start == i_) fail("expected a number, L or '('");
    return SymA(Rational(Integer(std::string(s_.substr(start, i_ - start)))));
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

}  // namespace

SymA SymA::parse(std::string_view text) { return SymParser(text).parse(); }

}  // namespace dpcalc
