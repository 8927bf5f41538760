#include "dpcalc/upoly.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace dpcalc {

UPoly::UPoly(std::vector<Rational> coeffs) : c_(std::move(coeffs)) { trim(); }

UPoly UPoly::constant(const Rational& c) { return UPoly(std::vector<Rational>{c}); }

UPoly UPoly::monomial(const Rational& c, std::size_t k) {
  std::vector<Rational> v(k + 1, Rational(0));
  v[k] = c;
  return UPoly(std::move(v));
}

UPoly UPoly::x_pow_minus_one(std::size_t k) {
  std::vector<Rational> v(k + 1, Rational(0));
  v[0] = -1;
  v[k] += 1;
  return UPoly(std::move(v));
}

void UPoly::trim() {
  while (!c_.empty() && c_.back() == 0) c_.pop_back();
}

Rational UPoly::eval(const Rational& x) const {
  Rational acc = 0;
  for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
  return acc;
}

UPoly UPoly::derivative() const {
  if (c_.size() <= 1) return {};
  std::vector<Rational> v(c_.size() - 1);
  for (std::size_t i = 1; i < c_.size(); ++i) v[i - 1] = c_[i] * static_cast<unsigned long>(i);
  return UPoly(std::move(v));
}

UPoly UPoly::monic() const {
  if (is_zero()) return {};
  return (1 / lead()) * *this;
}

std::size_t UPoly::low_order() const {
  std::size_t k = 0;
  while (k < c_.size() && c_[k] == 0) ++k;
  return k;
}

UPoly UPoly::shift_down(std::size_t k) const {
  if (k >= c_.size()) return {};
  return UPoly(std::vector<Rational>(c_.begin() + static_cast<long>(k), c_.end()));
}

UPoly operator+(const UPoly& a, const UPoly& b) {
  std::vector<Rational> v(std::max(a.c_.size(), b.c_.size()), Rational(0));
  for (std::size_t i = 0; i < a.c_.size(); ++i) v[i] += a.c_[i];
  for (std::size_t i = 0; i < b.c_.size(); ++i) v[i] += b.c_[i];
  return UPoly(std::move(v));
}

UPoly operator-(const UPoly& a) {
  std::vector<Rational> v(a.c_);
  for (auto& x : v) x = -x;
  return UPoly(std::move(v));
}

UPoly operator-(const UPoly& a, const UPoly& b) { return a + (-b); }

UPoly operator*(const UPoly& a, const UPoly& b) {
  if (a.is_zero() || b.is_zero()) return {};
  std::vector<Rational> v(a.c_.size() + b.c_.size() - 1, Rational(0));
  for (std::size_t i = 0; i < a.c_.size(); ++i) {
    if (a.c_[i] == 0) continue;
    for (std::size_t j = 0; j < b.c_.size(); ++j) v[i + j] += a.c_[i] * b.c_[j];
  }
  return UPoly(std::move(v));
}

UPoly operator*(const Rational& s, const UPoly& a) {
  std::vector<Rational> v(a.c_);
  for (auto& x : v) x *= s;
  return UPoly(std::move(v));
}

std::string UPoly::str(const std::string& var) const {
  if (is_zero()) return "0";
  std::string out;
  for (std::size_t k = c_.size(); k-- > 0;) {
    const Rational& c = c_[k];
    if (c == 0) continue;
    bool neg = c < 0;
    Rational a = neg ? Rational(-c) : c;
    if (out.empty()) out += neg ? "-" : "";
    else out += neg ? " - " : " + ";
    std::string mono = k == 0 ? "" : (k == 1 ? var : var + "^" + std::to_string(k));
    if (mono.empty()) out += a.get_str();
    else if (a == 1) out += mono;
    else out += a.get_str() + "*" + mono;
  }
  return out;
}

void divmod(const UPoly& a, const UPoly& b, UPoly& q, UPoly& r) {
  if (b.is_zero()) throw std::domain_error("polynomial division by zero");
  std::vector<Rational> rem = a.coeffs();
  const long db = b.degree();
  if (a.degree() < db) {
    q = {};
    r = a;
    return;
  }
  std::vector<Rational> quo(static_cast<std::size_t>(a.degree() - db + 1), Rational(0));
  const Rational inv_lead = 1 / b.lead();
  for (long k = a.degree(); k >= db; --k) {
    Rational f = rem[static_cast<std::size_t>(k)] * inv_lead;
    if (f == 0) continue;
    quo[static_cast<std::size_t>(k - db)] = f;
    for (long j = 0; j <= db; ++j) rem[static_cast<std::size_t>(k - db + j)] -= f * b.coeffs()[static_cast<std::size_t>(j)];
  }
  q = UPoly(std::move(quo));
  r = UPoly(std::move(rem));
}

UPoly operator%(const UPoly& a, const UPoly& b) {
  UPoly q, r;
  divmod(a, b, q, r);
  return r;
}

UPoly exact_div(const UPoly& a, const UPoly& b) {
  UPoly q, r;
  divmod(a, b, q, r);
  if (!r.is_zero()) throw std::domain_error("exact_div: remainder " + r.str());
  return q;
}

UPoly gcd(const UPoly& a, const UPoly& b) {
  UPoly x = a, y = b;
  while (!y.is_zero()) {
    UPoly r = x % y;
    x = std::move(y);
    y = std::move(r);
  }
  return x.monic();
}

UPoly pow(const UPoly& a, unsigned e) {
  UPoly acc = UPoly::constant(1), base = a;
  while (e) {
    if (e & 1u) acc = acc * base;
    e >>= 1u;
    if (e) base = base * base;
  }
  return acc;
}

const UPoly& cyclotomic(unsigned d) {
  static std::mutex mu;
  static std::map<unsigned, std::unique_ptr<UPoly>> cache;
  std::lock_guard<std::mutex> lock(mu);
  // Built bottom-up so the recursion never re-enters the lock.
  for (unsigned k = 1; k <= d; ++k) {
    if (cache.count(k)) continue;
    UPoly p = UPoly::x_pow_minus_one(k);
    for (unsigned e = 1; e < k; ++e)
      if (k % e == 0) p = exact_div(p, *cache.at(e));
    cache.emplace(k, std::make_unique<UPoly>(std::move(p)));
  }
  if (d == 0) throw std::invalid_argument("cyclotomic(0)");
  return *cache.at(d);
}

}  // namespace dpcalc
