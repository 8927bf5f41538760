#pragma once

// Sparse multivariate polynomials over Q[t], exponent vectors of fixed length.
// Internal to the formula layer.

#include <map>
#include <vector>

#include "dpcalc/upoly.hpp"

namespace dpcalc::detail {

struct MPoly {
  using Exps = std::vector<unsigned>;
  std::size_t nvars = 0;
  std::map<Exps, UPoly> terms;

  static MPoly constant(std::size_t n, const UPoly& c) {
    MPoly p;
    p.nvars = n;
    if (!c.is_zero()) p.terms[Exps(n, 0)] = c;
    return p;
  }
  static MPoly variable(std::size_t n, std::size_t i) {
    MPoly p;
    p.nvars = n;
    Exps e(n, 0);
    e[i] = 1;
    p.terms[e] = UPoly::constant(1);
    return p;
  }
  bool is_zero() const { return terms.empty(); }

  void add_term(const Exps& e, const UPoly& c) {
    auto it = terms.find(e);
    if (it == terms.end()) {
      if (!c.is_zero()) terms.emplace(e, c);
      return;
    }
    it->second = it->second + c;
    if (it->second.is_zero()) terms.erase(it);
  }

  friend MPoly operator+(const MPoly& a, const MPoly& b) {
    MPoly r = a;
    for (const auto& [e, c] : b.terms) r.add_term(e, c);
    return r;
  }
  friend MPoly operator-(const MPoly& a) {
    MPoly r = a;
    for (auto& [e, c] : r.terms) c = -c;
    return r;
  }
  friend MPoly operator-(const MPoly& a, const MPoly& b) { return a + (-b); }
  friend MPoly operator*(const MPoly& a, const MPoly& b) {
    MPoly r;
    r.nvars = a.nvars;
    for (const auto& [ea, ca] : a.terms)
      for (const auto& [eb, cb] : b.terms) {
        Exps e(a.nvars);
        for (std::size_t i = 0; i < a.nvars; ++i) e[i] = ea[i] + eb[i];
        r.add_term(e, ca * cb);
      }
    return r;
  }
  MPoly scaled(const Rational& s) const {
    MPoly r;
    r.nvars = nvars;
    for (const auto& [e, c] : terms) r.add_term(e, s * c);
    return r;
  }
  MPoly pow(unsigned k) const {
    MPoly r = constant(nvars, UPoly::constant(1));
    for (unsigned i = 0; i < k; ++i) r = r * *this;
    return r;
  }
  MPoly derivative(std::size_t i) const {
    MPoly r;
    r.nvars = nvars;
    for (const auto& [e, c] : terms) {
      if (e[i] == 0) continue;
      Exps f = e;
      --f[i];
      r.add_term(f, Rational(e[i]) * c);
    }
    return r;
  }
  bool mentions(std::size_t i) const {
    for (const auto& [e, c] : terms)
      if (e[i] > 0) return true;
    return false;
  }
};

}  // namespace dpcalc::detail
