#include "dpcalc/sturm.hpp"

#include <algorithm>
#include <stdexcept>

namespace dpcalc {

namespace {
int sign_of(const Rational& x) { return sgn(x); }
}  // namespace

SturmChain::SturmChain(const UPoly& p) {
  if (p.is_zero()) throw std::invalid_argument("Sturm chain of the zero polynomial");
  chain_.push_back(p);
  UPoly d = p.derivative();
  if (d.is_zero()) return;
  chain_.push_back(d);
  for (;;) {
    UPoly r = chain_[chain_.size() - 2] % chain_.back();
    if (r.is_zero()) break;
    chain_.push_back(-r);
  }
}

int SturmChain::sign_changes(const Rational& x) const {
  int changes = 0, last = 0;
  for (const auto& q : chain_) {
    int s = sign_of(q.eval(x));
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

int SturmChain::count_roots(const Rational& a, const Rational& b) const {
  if (!(a < b)) return 0;
  // Sturm's theorem counts distinct roots in (a, b] when the chain is built
  // from p and p' (valid for non-squarefree p as well).
  return sign_changes(a) - sign_changes(b);
}

UPoly squarefree_part(const UPoly& p) {
  if (p.degree() <= 0) return p;
  return exact_div(p, gcd(p, p.derivative()));
}

Rational cauchy_bound(const UPoly& p) {
  Rational m = 0;
  for (long i = 0; i < p.degree(); ++i) {
    Rational r = abs(p.coeffs()[static_cast<std::size_t>(i)] / p.lead());
    if (r > m) m = r;
  }
  return m + 1;
}

std::vector<std::pair<Rational, Rational>> isolate_roots(const UPoly& p, const Rational& lo, const Rational& hi) {
  std::vector<std::pair<Rational, Rational>> out;
  if (p.degree() <= 0) return out;
  SturmChain sc(p);
  std::vector<std::pair<Rational, Rational>> work{{lo, hi}};
  while (!work.empty()) {
    auto [a, b] = work.back();
    work.pop_back();
    int n = sc.count_roots(a, b);
    if (n == 0) continue;
    if (n == 1) {
      out.emplace_back(a, b);
      continue;
    }
    Rational m = (a + b) / 2;
    work.emplace_back(m, b);
    work.emplace_back(a, m);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool nonneg_on_ray(const UPoly& p, const Rational& a) {
  if (p.is_zero()) return true;
  if (p.degree() == 0) return p.lead() > 0;
  UPoly s = squarefree_part(p);
  SturmChain sc(s);
  Rational hi = cauchy_bound(s);
  if (hi < a + 1) hi = a + 1;
  auto roots = isolate_roots(s, a, hi);

  std::vector<Rational> samples;
  if (!roots.empty()) {
    // A point of (a, r_1): shrink towards a until no root lies in (a, x].
    Rational step = roots.front().second - a;
    Rational x = a + step;
    while (sc.count_roots(a, x) != 0) {
      step /= 2;
      x = a + step;
    }
    samples.push_back(x);
    for (std::size_t j = 0; j + 1 < roots.size(); ++j) {
      auto& cur = roots[j];
      auto& nxt = roots[j + 1];
      while (!(cur.second < nxt.first)) {
        for (auto* iv : {&cur, &nxt}) {
          Rational m = (iv->first + iv->second) / 2;
          if (sc.count_roots(iv->first, m) == 1) iv->second = m;
          else iv->first = m;
        }
      }
      samples.push_back((cur.second + nxt.first) / 2);
    }
  }
  samples.push_back(hi + 1);
  for (const auto& x : samples)
    if (p.eval(x) < 0) return false;
  return true;
}

}  // namespace dpcalc
