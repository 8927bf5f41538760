#include "dpcalc/presburger.hpp"

#include <cctype>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dpcalc::pres {

namespace {

std::int64_t floor_mod(std::int64_t a, std::int64_t d) { return ((a % d) + d) % d; }

}  // namespace

// ---------------------------------------------------------------------------
// AffineForm

AffineForm AffineForm::var(const std::string& name, std::int64_t coeff) {
  AffineForm f;
  f.coeffs_[name] = coeff;
  f.normalize();
  return f;
}

void AffineForm::normalize() { std::erase_if(coeffs_, [](const auto& kv) { return kv.second == 0; }); }

std::int64_t AffineForm::coeff(const std::string& v) const {
  auto it = coeffs_.find(v);
  return it == coeffs_.end() ? 0 : it->second;
}

AffineForm AffineForm::linear_part() const {
  AffineForm f = *this;
  f.constant_ = 0;
  return f;
}

AffineForm AffineForm::substitute(const std::string& v, const AffineForm& f) const {
  auto it = coeffs_.find(v);
  if (it == coeffs_.end()) return *this;
  AffineForm rest = *this;
  rest.coeffs_.erase(v);
  return rest + it->second * f;
}

std::int64_t AffineForm::eval(const Assignment& a) const {
  std::int64_t v = constant_;
  for (const auto& [name, c] : coeffs_) {
    auto it = a.find(name);
    if (it == a.end()) throw UnboundParameter("integer variable '" + name + "' has no value");
    v += c * it->second;
  }
  return v;
}

AffineForm AffineForm::partial_eval(const Assignment& a) const {
  AffineForm f(constant_);
  for (const auto& [name, c] : coeffs_) {
    auto it = a.find(name);
    if (it == a.end()) f.coeffs_[name] = c;
    else f.constant_ += c * it->second;
  }
  return f;
}

AffineForm operator+(const AffineForm& a, const AffineForm& b) {
  AffineForm f = a;
  f.constant_ += b.constant_;
  for (const auto& [name, c] : b.coeffs_) f.coeffs_[name] += c;
  f.normalize();
  return f;
}

AffineForm operator-(const AffineForm& a) { return -1 * a; }
AffineForm operator-(const AffineForm& a, const AffineForm& b) { return a + (-b); }

AffineForm operator*(std::int64_t s, const AffineForm& a) {
  AffineForm f = a;
  f.constant_ *= s;
  for (auto& [name, c] : f.coeffs_) c *= s;
  f.normalize();
  return f;
}

std::string AffineForm::str() const {
  std::string out;
  auto emit = [&out](std::int64_t c, const std::string& mono) {
    const bool neg = c < 0;
    const std::int64_t a = neg ? -c : c;
    if (out.empty()) out += neg ? "-" : "";
    else out += neg ? " - " : " + ";
    if (mono.empty()) out += std::to_string(a);
    else if (a == 1) out += mono;
    else out += std::to_string(a) + "*" + mono;
  };
  for (const auto& [name, c] : coeffs_) emit(c, name);
  if (constant_ != 0 || out.empty()) emit(constant_, "");
  return out;
}

AffineForm AffineForm::parse(std::string_view text) {
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) -> AffineForm {
    throw std::invalid_argument("cannot parse affine form '" + std::string(text) + "': " + msg);
  };
  auto skip = [&] {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
  };
  AffineForm f;
  bool first = true;
  for (;;) {
    skip();
    if (i == text.size()) break;
    std::int64_t sign = 1;
    if (text[i] == '+' || text[i] == '-') {
      sign = text[i] == '-' ? -1 : 1;
      ++i;
      skip();
    } else if (!first) {
      return fail("expected '+' or '-'");
    }
    first = false;
    std::int64_t c = 1;
    bool have_num = false;
    std::size_t start = i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      c = std::stoll(std::string(text.substr(start, i - start)));
      have_num = true;
      skip();
      if (i < text.size() && text[i] == '*') {
        ++i;
        skip();
      } else {
        f.constant_ += sign * c;
        continue;
      }
    }
    start = i;
    while (i < text.size() && (std::isalnum(static_cast<unsigned char>(text[i])) || text[i] == '_')) ++i;
    if (i == start) return fail(have_num ? "expected a variable after '*'" : "expected a term");
    f.coeffs_[std::string(text.substr(start, i - start))] += sign * c;
  }
  if (first) return fail("empty");
  f.normalize();
  return f;
}

// ---------------------------------------------------------------------------
// PresDomain

void PresDomain::validate() const {
  std::set<std::string> seen, all;
  for (const auto& v : vars) all.insert(v.name);
  for (const auto& v : vars) {
    if (v.modulus < 1) throw std::invalid_argument("modulus of " + v.name + " must be >= 1");
    if (v.residue < 0 || v.residue >= v.modulus) throw std::invalid_argument("residue of " + v.name + " out of range");
    for (const auto* b : {&v.lower, &v.upper}) {
      if (!*b) continue;
      for (const auto& [name, c] : (*b)->coeffs())
        if (all.count(name) && !seen.count(name))
          throw UnsupportedDomain("bound of " + v.name + " mentions " + name + ", which is not an outer variable");
    }
    if (!seen.insert(v.name).second) throw std::invalid_argument("variable " + v.name + " listed twice");
  }
}

bool PresDomain::contains(const Assignment& point) const {
  for (const auto& v : vars) {
    const std::int64_t x = point.at(v.name);
    if (v.lower && x < v.lower->eval(point)) return false;
    if (v.upper && x > v.upper->eval(point)) return false;
    if (floor_mod(x - v.residue, v.modulus) != 0) return false;
  }
  return true;
}

std::vector<std::string> PresDomain::names() const {
  std::vector<std::string> out;
  for (const auto& v : vars) out.push_back(v.name);
  return out;
}

// ---------------------------------------------------------------------------
// PresValue

PresValue::PresValue(const SymA& c) { add_term(AffineForm(), c); }
PresValue::PresValue(const PresTerm& t) { add_term(t.exponent, t.coeff); }
PresValue::PresValue(const SymA& coeff, const AffineForm& exponent) { add_term(exponent, coeff); }

void PresValue::add_term(const AffineForm& lin, const SymA& c) {
  if (c.is_zero()) return;
  AffineForm key = lin.linear_part();
  SymA v = c * SymA::L_pow(lin.constant());
  auto it = terms_.find(key);
  if (it == terms_.end()) {
    terms_.emplace(key, v);
    return;
  }
  it->second += v;
  if (it->second.is_zero()) terms_.erase(it);
}

bool PresValue::is_closed() const {
  return terms_.empty() || (terms_.size() == 1 && terms_.begin()->first.is_constant());
}

SymA PresValue::closed() const {
  if (terms_.empty()) return SymA();
  if (!is_closed()) throw UnboundParameter("value " + str() + " still depends on parameters");
  return terms_.begin()->second;
}

std::vector<std::string> PresValue::parameters() const {
  std::set<std::string> s;
  for (const auto& [lin, c] : terms_)
    for (const auto& [name, k] : lin.coeffs()) s.insert(name);
  return {s.begin(), s.end()};
}

SymA PresValue::evaluate(const Assignment& params) const {
  SymA acc;
  for (const auto& [lin, c] : terms_) acc += c * SymA::L_pow(lin.eval(params));
  return acc;
}

Rational PresValue::nu_q(const Assignment& params, const Rational& q) const {
  Rational acc = 0;
  for (const auto& [lin, c] : terms_) acc += dpcalc::nu_q(c, q) * rpow(q, lin.eval(params));
  return acc;
}

PresValue PresValue::substitute(const std::string& v, const AffineForm& f) const {
  PresValue out;
  for (const auto& [lin, c] : terms_) out.add_term(lin.substitute(v, f), c);
  return out;
}

PresValue PresValue::partial_eval(const Assignment& a) const {
  PresValue out;
  for (const auto& [lin, c] : terms_) out.add_term(lin.partial_eval(a), c);
  return out;
}

PresValue operator+(const PresValue& a, const PresValue& b) {
  PresValue out = a;
  for (const auto& [lin, c] : b.terms_) out.add_term(lin, c);
  return out;
}

PresValue operator-(const PresValue& a) {
  PresValue out;
  for (const auto& [lin, c] : a.terms_) out.terms_.emplace(lin, -c);
  return out;
}

PresValue operator*(const PresValue& a, const PresValue& b) {
  PresValue out;
  for (const auto& [la, ca] : a.terms_)
    for (const auto& [lb, cb] : b.terms_) out.add_term(la + lb, ca * cb);
  return out;
}

std::string PresValue::str() const {
  if (terms_.empty()) return "0";
  std::string out;
  for (const auto& [lin, c] : terms_) {
    if (!out.empty()) out += " + ";
    std::string cs = c.str();
    if (lin.is_constant()) {
      out += cs;
      continue;
    }
    const bool simple = c.denominator().empty() && c.numerator().coeffs().size() - c.numerator().low_order() == 1 &&
                        cs.find(' ') == std::string::npos;
    out += (simple ? cs : "(" + cs + ")") + "*L^(" + lin.str() + ")";
  }
  return out;
}

// ---------------------------------------------------------------------------
// summation

namespace {

// Smallest i >= l with i = r mod d, as an affine form.
AffineForm first_point(const AffineForm& l, std::int64_t d, std::int64_t r, const std::string& v) {
  if (d == 1) return l;
  for (const auto& [name, c] : l.coeffs())
    if (c % d != 0)
      throw UnsupportedDomain("lower bound " + l.str() + " of " + v + " is not compatible with the modulus " + std::to_string(d));
  return l + AffineForm(floor_mod(r - l.constant(), d));
}

AffineForm last_point(const AffineForm& u, std::int64_t d, std::int64_t r, const std::string& v) {
  if (d == 1) return u;
  for (const auto& [name, c] : u.coeffs())
    if (c % d != 0)
      throw UnsupportedDomain("upper bound " + u.str() + " of " + v + " is not compatible with the modulus " + std::to_string(d));
  return u - AffineForm(floor_mod(u.constant() - r, d));
}

// 1 / (1 - L^k), k != 0
SymA inv_one_minus(std::int64_t k) {
  if (k < 0) return SymA::inv_one_minus_L_pow(static_cast<unsigned>(-k));
  return a_div_by_unit(SymA(1), SymA(1) - SymA::L_pow(k));
}

PresValue sum_one(const VarRange& v, const AffineForm& lin, const SymA& c) {
  const std::int64_t a = lin.coeff(v.name);
  AffineForm rest = lin - AffineForm::var(v.name, a);
  const std::int64_t d = v.modulus;
  if (!v.lower && !v.upper) throw NotSummable("variable " + v.name + " ranges over all of Z");
  if (v.lower && !v.upper) {
    if (a >= 0)
      throw NotSummable("exponent coefficient " + std::to_string(a) + " of " + v.name + " on an upward ray is not negative");
    AffineForm i0 = first_point(*v.lower, d, v.residue, v.name);
    return PresValue(c * inv_one_minus(a * d), rest + a * i0);
  }
  if (!v.lower && v.upper) {
    if (a <= 0)
      throw NotSummable("exponent coefficient " + std::to_string(a) + " of " + v.name + " on a downward ray is not positive");
    AffineForm i1 = last_point(*v.upper, d, v.residue, v.name);
    return PresValue(c * inv_one_minus(-a * d), rest + a * i1);
  }
  AffineForm i0 = first_point(*v.lower, d, v.residue, v.name);
  AffineForm i1 = last_point(*v.upper, d, v.residue, v.name);
  AffineForm span = i1 - i0;
  if (span.is_constant() && span.constant() < 0) return PresValue();
  if (a == 0) {
    if (!span.is_constant())
      throw UnsupportedDomain("the number of values of " + v.name + " depends on " + span.str());
    return PresValue(c * SymA(span.constant() / d + 1), rest);
  }
  // Σ_{j=0}^{n-1} L^{a(i0 + jd)} = (L^{a i0} - L^{a(i1 + d)}) / (1 - L^{ad})
  SymA k = c * inv_one_minus(a * d);
  return PresValue(k, rest + a * i0) - PresValue(k, rest + a * (i1 + AffineForm(d)));
}

}  // namespace

PresValue sum(const PresDomain& domain, const PresValue& integrand) {
  domain.validate();
  PresValue cur = integrand;
  for (auto it = domain.vars.rbegin(); it != domain.vars.rend(); ++it) {
    PresValue next;
    for (const auto& [lin, c] : cur.terms()) next = next + sum_one(*it, lin, c);
    cur = std::move(next);
  }
  return cur;
}

PresValue sum(const PresDomain& domain, const PresTerm& term) { return sum(domain, PresValue(term)); }

namespace {

// Decide whether two one-variable ranges over the same variable can share a
// point. nullopt when parametric bounds leave it open.
std::optional<bool> ranges_overlap(const VarRange& x, const VarRange& y) {
  const std::int64_t g = std::gcd(x.modulus, y.modulus);
  if (floor_mod(x.residue - y.residue, g) != 0) return false;
  auto separated = [](const std::optional<AffineForm>& up, const std::optional<AffineForm>& lo) {
    if (!up || !lo) return false;
    AffineForm gap = *lo - *up;
    return gap.is_constant() && gap.constant() > 0;
  };
  if (separated(x.upper, y.lower) || separated(y.upper, x.lower)) return false;
  if ((!x.upper && !y.upper) || (!x.lower && !y.lower)) return true;
  auto constant_or_open = [](const std::optional<AffineForm>& b) { return !b || b->is_constant(); };
  if (!(constant_or_open(x.lower) && constant_or_open(x.upper) && constant_or_open(y.lower) && constant_or_open(y.upper)))
    return std::nullopt;
  // Combined progression (lcm, residue) by search; moduli are small.
  const std::int64_t m = std::lcm(x.modulus, y.modulus);
  std::int64_t res = -1;
  for (std::int64_t r = 0; r < m; ++r)
    if (floor_mod(r - x.residue, x.modulus) == 0 && floor_mod(r - y.residue, y.modulus) == 0) res = r;
  std::optional<std::int64_t> lo, hi;
  for (const auto& b : {x.lower, y.lower})
    if (b) lo = lo ? std::max(*lo, b->constant()) : b->constant();
  for (const auto& b : {x.upper, y.upper})
    if (b) hi = hi ? std::min(*hi, b->constant()) : b->constant();
  if (!lo || !hi) return true;
  const std::int64_t first = *lo + floor_mod(res - *lo, m);
  return first <= *hi;
}

}  // namespace

PresValue sum_piecewise(const std::vector<std::pair<PresDomain, PresTerm>>& pieces) {
  for (std::size_t i = 0; i < pieces.size(); ++i)
    for (std::size_t j = i + 1; j < pieces.size(); ++j) {
      const auto& a = pieces[i].first.vars;
      const auto& b = pieces[j].first.vars;
      if (a.size() != 1 || b.size() != 1 || a[0].name != b[0].name) continue;
      if (ranges_overlap(a[0], b[0]).value_or(false))
        throw OverlapDetected("pieces " + std::to_string(i) + " and " + std::to_string(j) + " share points");
    }
  PresValue acc;
  for (const auto& [dom, term] : pieces) acc = acc + sum(dom, term);
  return acc;
}

// ---------------------------------------------------------------------------
// numeric cross-check

namespace {

using Bound = std::optional<std::int64_t>;

// Σ_{i=lo}^{hi} q^{a i}; nullopt when infinite.
std::optional<Rational> geometric(const Rational& q, std::int64_t a, Bound lo, Bound hi) {
  if (lo && hi && *lo > *hi) return Rational(0);
  if (a == 0) {
    if (!lo || !hi) return std::nullopt;
    return Rational(*hi - *lo + 1);
  }
  const Rational r = rpow(q, a);
  if (lo && hi) return (rpow(q, a * *lo) - rpow(q, a * (*hi + 1))) / (1 - r);
  if (lo) {
    if (!(r < 1)) return std::nullopt;
    return rpow(q, a * *lo) / (1 - r);
  }
  if (hi) {
    if (!(r > 1)) return std::nullopt;
    return rpow(q, a * *hi) / (1 - 1 / r);
  }
  return std::nullopt;
}

}  // namespace

TruncatedSum evaluate_truncated(const PresDomain& domain, const PresTerm& term, const Rational& q, std::int64_t cutoff,
                                const Assignment& params) {
  if (!(q > 1)) throw std::domain_error("evaluate_truncated needs q > 1");
  domain.validate();
  const Rational c = nu_q(term.coeff, q);
  TruncatedSum out{0, std::nullopt};

  Assignment point = params;
  std::function<void(std::size_t)> walk = [&](std::size_t j) {
    if (j == domain.vars.size()) {
      out.partial += c * rpow(q, term.exponent.eval(point));
      return;
    }
    const auto& v = domain.vars[j];
    std::int64_t lo = -cutoff, hi = cutoff;
    if (v.lower) lo = std::max(lo, v.lower->eval(point));
    if (v.upper) hi = std::min(hi, v.upper->eval(point));
    for (std::int64_t i = lo + floor_mod(v.residue - lo, v.modulus); i <= hi; i += v.modulus) {
      point[v.name] = i;
      walk(j + 1);
    }
    point.erase(v.name);
  };
  walk(0);

  // Product box containing the domain: project each variable's range by
  // interval arithmetic over the outer intervals.
  std::map<std::string, std::pair<Bound, Bound>> box;
  auto extreme = [&](const AffineForm& f, bool want_max) -> Bound {
    const AffineForm g = f.partial_eval(params);
    std::int64_t v = g.constant();
    for (const auto& [name, k] : g.coeffs()) {
      auto it = box.find(name);
      if (it == box.end()) throw UnboundParameter("integer variable '" + name + "' has no value");
      const Bound& end = (k > 0) == want_max ? it->second.second : it->second.first;
      if (!end) return std::nullopt;
      v += k * *end;
    }
    return v;
  };
  for (const auto& v : domain.vars) {
    Bound lo = v.lower ? extreme(*v.lower, false) : Bound();
    Bound hi = v.upper ? extreme(*v.upper, true) : Bound();
    box[v.name] = {lo, hi};
  }
  const AffineForm e = term.exponent.partial_eval(params);
  Rational total = abs(c) * rpow(q, e.constant()), inside = total;
  for (const auto& v : domain.vars) {
    auto [lo, hi] = box[v.name];
    const std::int64_t a = e.coeff(v.name);
    auto t = geometric(q, a, lo, hi);
    if (!t) return out;
    Bound clo = lo ? std::max(*lo, -cutoff) : -cutoff;
    Bound chi = hi ? std::min(*hi, cutoff) : cutoff;
    total *= *t;
    inside *= *geometric(q, a, clo, chi);
  }
  out.tail_bound = total - inside;
  return out;
}

}  // namespace dpcalc::pres
