#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_map>

#include "dpcalc/errors.hpp"
#include "dpcalc/formula.hpp"
#include "dpcalc/kernels.hpp"
#include "formula_internal.hpp"

namespace dpcalc::fm {

std::string truth_name(Truth3 t) {
  switch (t) {
    case Truth3::True: return "true";
    case Truth3::False: return "false";
    case Truth3::Undecided: return "undecided";
  }
  return "?";
}

Truth3 t_not(Truth3 a) {
  if (a == Truth3::True) return Truth3::False;
  if (a == Truth3::False) return Truth3::True;
  return Truth3::Undecided;
}

Truth3 t_and(Truth3 a, Truth3 b) {
  if (a == Truth3::False || b == Truth3::False) return Truth3::False;
  if (a == Truth3::True && b == Truth3::True) return Truth3::True;
  return Truth3::Undecided;
}

Truth3 t_or(Truth3 a, Truth3 b) {
  if (a == Truth3::True || b == Truth3::True) return Truth3::True;
  if (a == Truth3::False && b == Truth3::False) return Truth3::False;
  return Truth3::Undecided;
}

namespace {

using detail::MPoly;
using lf::LFElem;
using lf::LocalFieldSpec;

std::uint32_t mod_rational(const Rational& r, std::uint32_t p) {
  Integer num = r.get_num() % p, den = r.get_den() % p;
  if (num < 0) num += p;
  if (den == 0) throw NotPIntegral("coefficient " + to_string(r) + " is not " + std::to_string(p) + "-integral");
  Integer inv;
  mpz_invert(inv.get_mpz_t(), den.get_mpz_t(), Integer(p).get_mpz_t());
  return static_cast<std::uint32_t>(Integer(num * inv % p).get_ui());
}

// Image of a polynomial in t with rational coefficients.
LFElem embed_tpoly(const UPoly& c, const LocalFieldSpec& field) {
  if (field.kind == lf::FieldKind::CharZero) return lf::embed_rational(c.eval(Rational(field.prime)), field);
  std::vector<std::uint32_t> d;
  for (const auto& q : c.coeffs()) d.push_back(mod_rational(q, field.prime));
  std::size_t v = 0;
  while (v < d.size() && d[v] == 0) ++v;
  if (v == d.size()) return LFElem::zero(field);
  return LFElem::exact_series(field, static_cast<long>(v), std::vector<std::uint32_t>(d.begin() + static_cast<long>(v), d.end()));
}

struct CMono {
  LFElem coeff;
  std::vector<std::pair<std::size_t, unsigned>> pows;
};

struct CPoly {
  std::vector<CMono> monos;
};

CPoly compile_poly(const MPoly& p, const LocalFieldSpec& field) {
  CPoly out;
  for (const auto& [e, c] : p.terms) {
    CMono m{embed_tpoly(c, field), {}};
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e[i]) m.pows.emplace_back(i, e[i]);
    out.monos.push_back(std::move(m));
  }
  return out;
}

// Extended integers for ZZ values: ±kZInf are the infinities.
struct ZI {
  std::int64_t lo = 0, hi = 0;
  bool undefined = false;
};

std::int64_t add_e(std::int64_t a, std::int64_t b, bool& undef) {
  if ((a == kZInf && b == -kZInf) || (a == -kZInf && b == kZInf)) {
    undef = true;
    return 0;
  }
  if (a == kZInf || b == kZInf) return kZInf;
  if (a == -kZInf || b == -kZInf) return -kZInf;
  const std::int64_t s = a + b;
  return std::clamp(s, -kZInf, kZInf);
}

std::int64_t mul_e(std::int64_t c, std::int64_t a) {
  if (c == 0) return 0;
  if (a == kZInf || a == -kZInf) return c > 0 ? a : -a;
  return std::clamp(c * a, -kZInf, kZInf);
}

ZI z_add(const ZI& a, const ZI& b) {
  ZI r;
  r.undefined = a.undefined || b.undefined;
  r.lo = add_e(a.lo, b.lo, r.undefined);
  r.hi = add_e(a.hi, b.hi, r.undefined);
  return r;
}

ZI z_neg(const ZI& a) { return {-a.hi, -a.lo, a.undefined}; }

ZI z_scale(std::int64_t c, const ZI& a) {
  ZI r{mul_e(c, a.lo), mul_e(c, a.hi), a.undefined};
  if (c < 0) std::swap(r.lo, r.hi);
  return r;
}

std::int64_t ext_to_i64(const lf::ExtInt& e) { return e.is_infinite() ? kZInf : e.value(); }

std::uint64_t powmod(std::uint64_t b, unsigned e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = r * b % m;
    b = b * b % m;
    e >>= 1;
  }
  return r;
}

std::vector<NodePtr> conjuncts(const NodePtr& n) {
  if (n->kind == FormKind::And) return n->children;
  return {n};
}

bool is_var(const TermPtr& t, const std::string& v) { return t->kind == TermKind::Var && t->name == v; }

bool mentions(const TermPtr& t, const std::string& v) {
  if (is_var(t, v)) return true;
  return std::any_of(t->args.begin(), t->args.end(), [&](const TermPtr& a) { return mentions(a, v); });
}

bool mentions_any_var(const TermPtr& t) {
  if (t->kind == TermKind::Var || t->kind == TermKind::Ord || t->kind == TermKind::Inf) return true;
  return std::any_of(t->args.begin(), t->args.end(), [](const TermPtr& a) { return mentions_any_var(a); });
}

}  // namespace

// ---------------------------------------------------------------------------
// Interpreter

struct Interpreter::Impl {
  Formula formula;
  LocalFieldSpec field;
  InterpretOptions opts;
  std::map<std::string, std::size_t> slots;
  std::size_t nslots = 0;

  std::unordered_map<const Term*, CPoly> vf_terms;  // ord/ac arguments
  std::unordered_map<const Node*, CPoly> vf_atoms;  // lhs - rhs
  struct VFQuant {
    std::size_t slot;
    std::vector<NodePtr> conj;
    std::map<const Node*, CPoly> derivative;  // VF equalities mentioning the variable
    bool bounded_in_O = false;
  };
  std::unordered_map<const Node*, VFQuant> vf_quants;

  struct Env {
    std::vector<std::optional<Value>> v;
  };

  static constexpr std::size_t kWitnessBoxLimit = 200000;

  Impl(const Formula& f, const LocalFieldSpec& fs, InterpretOptions o) : formula(f), field(fs), opts(o) {
    field.validate();
    for (const auto& n : f.all_names()) slots.emplace(n, slots.size());
    nslots = slots.size();
    compile(f.root());
  }

  MPoly expand(const TermPtr& t) const { return detail_fm::expand(t, slots, nslots, {}); }

  void compile_term(const TermPtr& t) {
    if (t->kind == TermKind::Ord || t->kind == TermKind::Ac) {
      vf_terms.emplace(t.get(), compile_poly(expand(t->args[0]), field));
      return;
    }
    for (const auto& a : t->args) compile_term(a);
  }

  void compile(const NodePtr& n) {
    if (n->kind == FormKind::Atom) {
      if (n->lhs->sort == Sort::VF)
        vf_atoms.emplace(n.get(), compile_poly(expand(n->lhs) - expand(n->rhs), field));
      else {
        compile_term(n->lhs);
        compile_term(n->rhs);
      }
    }
    if (n->kind == FormKind::Exists && n->var_sort == Sort::VF) {
      if (!opts.oracle_mode)
        throw UnsupportedFormula("VF quantifier over '" + n->var + "' needs oracle mode");
      VFQuant q;
      q.slot = slots.at(n->var);
      q.conj = conjuncts(n->children[0]);
      for (const auto& c : q.conj) {
        if (c->kind != FormKind::Atom) continue;
        if (c->lhs->sort == Sort::VF && c->rel == Rel::Eq) {
          MPoly p = expand(c->lhs) - expand(c->rhs);
          if (p.mentions(q.slot)) q.derivative.emplace(c.get(), compile_poly(p.derivative(q.slot), field));
        }
        // ord(y) >= c or c <= ord(y) with a nonnegative constant c
        auto ord_y = [&](const TermPtr& t) { return t->kind == TermKind::Ord && is_var(t->args[0], n->var); };
        auto nonneg = [](const TermPtr& t) { return t->kind == TermKind::Const && t->value >= 0; };
        if ((c->rel == Rel::Ge && ord_y(c->lhs) && nonneg(c->rhs)) ||
            (c->rel == Rel::Le && nonneg(c->lhs) && ord_y(c->rhs)) ||
            (c->rel == Rel::Gt && ord_y(c->lhs) && nonneg(c->rhs)) ||
            (c->rel == Rel::Lt && nonneg(c->lhs) && ord_y(c->rhs)))
          q.bounded_in_O = true;
      }
      vf_quants.emplace(n.get(), std::move(q));
    }
    for (const auto& c : n->children) compile(c);
  }

  // terms ------------------------------------------------------------------

  LFElem eval_poly(const CPoly& p, const Env& env) const {
    LFElem acc = LFElem::zero(field);
    for (const auto& m : p.monos) {
      LFElem v = m.coeff;
      for (const auto& [slot, e] : m.pows) {
        const auto& val = env.v[slot];
        if (!val) throw UnboundVariable("variable has no value");
        v = lf::trunc::mul(v, lf::trunc::pow(std::get<LFElem>(*val), e));
      }
      acc = lf::trunc::add(acc, v);
    }
    return acc;
  }

  std::optional<std::uint32_t> eval_rf(const TermPtr& t, const Env& env) const {
    const std::uint64_t p = field.prime;
    switch (t->kind) {
      case TermKind::Var: {
        const auto& val = env.v[slots.at(t->name)];
        if (!val) throw UnboundVariable("variable '" + t->name + "' has no value");
        return static_cast<std::uint32_t>(std::get<std::uint32_t>(*val) % p);
      }
      case TermKind::Const: return mod_rational(t->value, field.prime);
      case TermKind::Ac: return lf::trunc::ac_if_known(eval_poly(vf_terms.at(t.get()), env));
      case TermKind::Neg: {
        auto a = eval_rf(t->args[0], env);
        if (!a) return std::nullopt;
        return static_cast<std::uint32_t>((p - *a) % p);
      }
      case TermKind::Pow: {
        auto a = eval_rf(t->args[0], env);
        if (!a) return std::nullopt;
        return static_cast<std::uint32_t>(powmod(*a, t->exponent, p));
      }
      case TermKind::Add:
      case TermKind::Sub:
      case TermKind::Mul: {
        auto a = eval_rf(t->args[0], env), b = eval_rf(t->args[1], env);
        if (t->kind == TermKind::Mul && ((a && *a == 0) || (b && *b == 0))) return 0u;
        if (!a || !b) return std::nullopt;
        if (t->kind == TermKind::Add) return static_cast<std::uint32_t>((std::uint64_t{*a} + *b) % p);
        if (t->kind == TermKind::Sub) return static_cast<std::uint32_t>((std::uint64_t{*a} + p - *b) % p);
        return static_cast<std::uint32_t>(std::uint64_t{*a} * *b % p);
      }
      default: throw UnsupportedFormula("not an RF term");
    }
  }

  ZI eval_zz(const TermPtr& t, const Env& env) const {
    switch (t->kind) {
      case TermKind::Var: {
        const auto& val = env.v[slots.at(t->name)];
        if (!val) throw UnboundVariable("variable '" + t->name + "' has no value");
        const std::int64_t z = std::get<std::int64_t>(*val);
        return {z, z};
      }
      case TermKind::Const: {
        const std::int64_t z = t->value.get_num().get_si();
        return {z, z};
      }
      case TermKind::Inf: return {kZInf, kZInf};
      case TermKind::Ord: {
        auto [lo, hi] = lf::trunc::ord_bounds(eval_poly(vf_terms.at(t.get()), env));
        return {ext_to_i64(lo), ext_to_i64(hi)};
      }
      case TermKind::Add: return z_add(eval_zz(t->args[0], env), eval_zz(t->args[1], env));
      case TermKind::Sub: return z_add(eval_zz(t->args[0], env), z_neg(eval_zz(t->args[1], env)));
      case TermKind::Neg: return z_neg(eval_zz(t->args[0], env));
      case TermKind::Mul: {
        // one factor is a constant expression
        const ZI a = eval_zz(t->args[0], env), b = eval_zz(t->args[1], env);
        const bool left_const = a.lo == a.hi && !a.undefined && a.lo != kZInf && a.lo != -kZInf &&
                                !mentions_any_var(t->args[0]);
        return left_const ? z_scale(a.lo, b) : z_scale(b.lo, a);
      }
      default: throw UnsupportedFormula("not a ZZ term");
    }
  }

  // formulas ---------------------------------------------------------------

  Truth3 eval_atom(const NodePtr& n, Env& env) const {
    switch (n->lhs->sort) {
      case Sort::VF: {
        LFElem d = eval_poly(vf_atoms.at(n.get()), env);
        Truth3 eq = d.is_exact_zero() ? Truth3::True : d.determined() ? Truth3::False : Truth3::Undecided;
        if (n->rel == Rel::Eq) return eq;
        if (n->rel == Rel::Ne) return t_not(eq);
        throw UnsupportedFormula("order relation on VF terms");
      }
      case Sort::RF: {
        auto a = eval_rf(n->lhs, env), b = eval_rf(n->rhs, env);
        if (!a || !b) return Truth3::Undecided;
        const bool eq = *a == *b;
        if (n->rel == Rel::Eq) return eq ? Truth3::True : Truth3::False;
        if (n->rel == Rel::Ne) return eq ? Truth3::False : Truth3::True;
        throw UnsupportedFormula("order relation on RF terms");
      }
      case Sort::ZZ: {
        const ZI a = eval_zz(n->lhs, env), b = eval_zz(n->rhs, env);
        if (a.undefined || b.undefined) return Truth3::Undecided;
        auto le = [](const ZI& x, const ZI& y) {
          if (x.hi <= y.lo) return Truth3::True;
          if (x.lo > y.hi) return Truth3::False;
          return Truth3::Undecided;
        };
        auto lt = [](const ZI& x, const ZI& y) {
          if (x.hi < y.lo) return Truth3::True;
          if (x.lo >= y.hi) return Truth3::False;
          return Truth3::Undecided;
        };
        auto eq = [&]() {
          if (a.lo == a.hi && b.lo == b.hi) return a.lo == b.lo ? Truth3::True : Truth3::False;
          if (a.hi < b.lo || b.hi < a.lo) return Truth3::False;
          return Truth3::Undecided;
        };
        switch (n->rel) {
          case Rel::Eq: return eq();
          case Rel::Ne: return t_not(eq());
          case Rel::Le: return le(a, b);
          case Rel::Lt: return lt(a, b);
          case Rel::Ge: return le(b, a);
          case Rel::Gt: return lt(b, a);
          case Rel::Congruent: {
            if (a.lo != a.hi || b.lo != b.hi) return Truth3::Undecided;
            if (a.lo == kZInf || b.lo == kZInf || a.lo == -kZInf || b.lo == -kZInf) return Truth3::False;
            std::int64_t r = (a.lo - b.lo) % n->modulus;
            return r == 0 ? Truth3::True : Truth3::False;
          }
        }
      }
    }
    return Truth3::Undecided;
  }

  Truth3 eval(const NodePtr& n, Env& env) const {
    switch (n->kind) {
      case FormKind::True: return Truth3::True;
      case FormKind::False: return Truth3::False;
      case FormKind::Atom: return eval_atom(n, env);
      case FormKind::Not: return t_not(eval(n->children[0], env));
      case FormKind::And: {
        Truth3 r = Truth3::True;
        for (const auto& c : n->children) {
          r = t_and(r, eval(c, env));
          if (r == Truth3::False) break;
        }
        return r;
      }
      case FormKind::Or: {
        Truth3 r = Truth3::False;
        for (const auto& c : n->children) {
          r = t_or(r, eval(c, env));
          if (r == Truth3::True) break;
        }
        return r;
      }
      case FormKind::Exists: {
        const std::size_t slot = slots.at(n->var);
        auto saved = env.v[slot];
        Truth3 r;
        switch (n->var_sort) {
          case Sort::RF: r = exists_rf(n, slot, env); break;
          case Sort::ZZ: r = exists_zz(n, slot, env); break;
          default: r = exists_vf(n, env); break;
        }
        env.v[slot] = saved;
        return r;
      }
    }
    return Truth3::Undecided;
  }

  Truth3 exists_rf(const NodePtr& n, std::size_t slot, Env& env) const {
    Truth3 r = Truth3::False;
    for (std::uint32_t u = 0; u < field.prime && r != Truth3::True; ++u) {
      env.v[slot] = Value(u);
      r = t_or(r, eval(n->children[0], env));
    }
    return r;
  }

  Truth3 exists_zz(const NodePtr& n, std::size_t slot, Env& env) const {
    // Bounds from top-level conjuncts `n <= T`, `T <= n`, `n == T`, ... with T free of n.
    std::optional<std::int64_t> lo, hi;
    for (const auto& c : conjuncts(n->children[0])) {
      if (c->kind != FormKind::Atom || c->rel == Rel::Congruent || c->rel == Rel::Ne) continue;
      const bool left = is_var(c->lhs, n->var) && !mentions(c->rhs, n->var);
      const bool right = is_var(c->rhs, n->var) && !mentions(c->lhs, n->var);
      if (!left && !right) continue;
      const ZI v = eval_zz(left ? c->rhs : c->lhs, env);
      if (v.undefined || v.lo != v.hi || v.lo == kZInf || v.lo == -kZInf) continue;
      const std::int64_t b = v.lo;
      auto set_lo = [&](std::int64_t x) { lo = lo ? std::max(*lo, x) : x; };
      auto set_hi = [&](std::int64_t x) { hi = hi ? std::min(*hi, x) : x; };
      Rel rel = c->rel;
      if (right) {
        // T rel n  ->  n rel' T
        if (rel == Rel::Le) rel = Rel::Ge;
        else if (rel == Rel::Lt) rel = Rel::Gt;
        else if (rel == Rel::Ge) rel = Rel::Le;
        else if (rel == Rel::Gt) rel = Rel::Lt;
      }
      switch (rel) {
        case Rel::Eq: set_lo(b); set_hi(b); break;
        case Rel::Le: set_hi(b); break;
        case Rel::Lt: set_hi(b - 1); break;
        case Rel::Ge: set_lo(b); break;
        case Rel::Gt: set_lo(b + 1); break;
        default: break;
      }
    }
    const bool bounded = lo && hi && *hi - *lo <= 1000000;
    const std::int64_t B = field.precision;
    const std::int64_t a = bounded ? *lo : -B, b = bounded ? *hi : B;
    Truth3 r = Truth3::False;
    for (std::int64_t z = a; z <= b && r != Truth3::True; ++z) {
      env.v[slot] = Value(z);
      r = t_or(r, eval(n->children[0], env));
    }
    if (!bounded && r != Truth3::True) return Truth3::Undecided;
    return r;
  }

  LFElem exact_center(const std::vector<std::uint32_t>& digits) const {
    if (field.kind == lf::FieldKind::CharZero) {
      Integer v = 0;
      for (std::size_t i = digits.size(); i-- > 0;) v = v * field.prime + digits[i];
      return lf::embed_rational(Rational(v), field);
    }
    std::size_t k = 0;
    while (k < digits.size() && digits[k] == 0) ++k;
    if (k == digits.size()) return LFElem::zero(field);
    return LFElem::exact_series(field, static_cast<long>(k),
                                std::vector<std::uint32_t>(digits.begin() + static_cast<long>(k), digits.end()));
  }

  // Hensel certificate at a finest box: the single undecided conjunct is a VF
  // equation f(y) = 0 with a simple enough root inside the box.
  bool hensel_certified(const VFQuant& q, const std::vector<std::uint32_t>& digits, Env& env) const {
    const Node* eqn = nullptr;
    for (const auto& c : q.conj) {
      const Truth3 t = eval(c, env);
      if (t == Truth3::True) continue;
      if (t == Truth3::False || eqn || !q.derivative.count(c.get())) return false;
      eqn = c.get();
    }
    if (!eqn) return true;
    auto saved = env.v[q.slot];
    env.v[q.slot] = Value(exact_center(digits));
    const LFElem f = eval_poly(vf_atoms.at(eqn), env);
    const LFElem df = eval_poly(q.derivative.at(eqn), env);
    env.v[q.slot] = saved;
    auto [dlo, dhi] = lf::trunc::ord_bounds(df);
    if (dlo != dhi || dlo.is_infinite()) return false;
    const std::int64_t e = dlo.value();
    if (f.is_exact_zero()) return true;
    const auto [flo, fhi] = lf::trunc::ord_bounds(f);
    if (flo.is_infinite()) return true;
    const std::int64_t v = flo.value();
    return v > 2 * e && v - e >= static_cast<std::int64_t>(digits.size());
  }

  Truth3 exists_vf(const NodePtr& n, Env& env) const {
    const VFQuant& q = vf_quants.at(n.get());
    std::size_t boxes = 0;
    bool exhausted = false;
    std::vector<std::uint32_t> digits;
    std::function<Truth3()> search = [&]() -> Truth3 {
      if (++boxes > kWitnessBoxLimit) {
        exhausted = true;
        return Truth3::Undecided;
      }
      env.v[q.slot] = Value(LFElem::residue_box(field, digits));
      const Truth3 t = eval(n->children[0], env);
      if (t != Truth3::Undecided) return t;
      if (static_cast<int>(digits.size()) >= field.precision)
        return hensel_certified(q, digits, env) ? Truth3::True : Truth3::Undecided;
      Truth3 r = Truth3::False;
      for (std::uint32_t d = 0; d < field.prime && r != Truth3::True && !exhausted; ++d) {
        digits.push_back(d);
        r = t_or(r, search());
        digits.pop_back();
      }
      return exhausted && r != Truth3::True ? Truth3::Undecided : r;
    };
    Truth3 r = search();
    if (r == Truth3::False && !q.bounded_in_O) return Truth3::Undecided;
    return r;
  }

  Truth3 run(const Assignment& a) const {
    Env env;
    env.v.resize(nslots);
    for (const auto& v : formula.free_vars()) {
      auto it = a.find(v.name);
      if (it == a.end()) throw UnboundVariable("no value for free variable '" + v.name + "'");
      const std::size_t idx = it->second.index();
      const std::size_t want = v.sort == Sort::VF ? 0 : v.sort == Sort::RF ? 1 : 2;
      if (idx != want) throw SortError("value for '" + v.name + "' is not of sort " + sort_name(v.sort));
      if (idx == 0 && !(std::get<LFElem>(it->second).field() == field))
        throw SortError("value for '" + v.name + "' lives in " + std::get<LFElem>(it->second).field().name());
      env.v[slots.at(v.name)] = it->second;
    }
    return eval(formula.root(), env);
  }
};

Interpreter::Interpreter(const Formula& f, const LocalFieldSpec& field, InterpretOptions opts)
    : impl_(std::make_unique<Impl>(f, field, opts)) {}
Interpreter::~Interpreter() = default;
Interpreter::Interpreter(Interpreter&&) noexcept = default;

Truth3 Interpreter::eval(const Assignment& a) const { return impl_->run(a); }

Truth3 interpret(const Formula& f, const LocalFieldSpec& field, const Assignment& a, InterpretOptions opts) {
  return Interpreter(f, field, opts).eval(a);
}

// ---------------------------------------------------------------------------
// residue-field counting

namespace {

struct RFMono {
  Integer coeff;
  std::vector<unsigned> exps;
};

class Counter {
 public:
  Counter(const Formula& f, std::uint32_t q, const CountOptions& opts) : f_(f), q_(q) {
    if (q < 2 || !is_prime(q))
      throw InvalidPrime(std::to_string(q) + " is not prime");
    for (const auto& n : f.all_names()) slots_.emplace(n, slots_.size());
    check(f.root(), 0);
    vals_.assign(slots_.size(), 0);
    for (const auto& [name, v] : opts.fixed) {
      auto it = slots_.find(name);
      if (it != slots_.end()) vals_[it->second] = v % q;
    }
    std::vector<std::string> counted = opts.counted;
    if (counted.empty())
      for (const auto& v : f.free_vars())
        if (!opts.fixed.count(v.name)) counted.push_back(v.name);
    for (const auto& v : f.free_vars()) {
      if (v.sort != Sort::RF) throw UnsupportedFormula("free variable '" + v.name + "' is not of sort RF");
      if (!opts.fixed.count(v.name) && std::find(counted.begin(), counted.end(), v.name) == counted.end())
        throw UnboundVariable("free variable '" + v.name + "' is neither counted nor fixed");
    }
    for (const auto& c : counted) {
      if (opts.fixed.count(c)) continue;
      auto it = slots_.find(c);
      if (it == slots_.end()) {
        extra_dims_ += 1;  // a counted variable the formula does not mention
        continue;
      }
      counted_.push_back(it->second);
    }
    const double est = std::pow(double(q), double(counted.size() + depth_)) * std::max<std::size_t>(1, atoms_);
    if (est > opts.budget)
      throw TooLarge("estimated " + std::to_string(est) + " atom evaluations exceed the budget");
    compile(f.root());
    xs_.resize(q);
    for (std::uint32_t i = 0; i < q; ++i) xs_[i] = i;
  }

  std::uint64_t run() {
    std::uint64_t total = 0;
    const bool batch = !counted_.empty();
    const std::size_t width = batch ? q_ : 1;
    batch_slot_ = batch ? static_cast<long>(counted_.back()) : -1;
    std::vector<std::size_t> outer(counted_.begin(), batch ? counted_.end() - 1 : counted_.end());
    for (std::size_t s : outer) vals_[s] = 0;
    for (;;) {
      auto mask = eval(f_.root(), width);
      total += static_cast<std::uint64_t>(std::count(mask.begin(), mask.end(), 1));
      std::size_t k = 0;
      for (; k < outer.size(); ++k) {
        if (++vals_[outer[k]] < q_) break;
        vals_[outer[k]] = 0;
      }
      if (k == outer.size()) break;
    }
    for (int i = 0; i < extra_dims_; ++i) total *= q_;
    return total;
  }

 private:
  const Formula& f_;
  std::uint32_t q_;
  std::map<std::string, std::size_t> slots_;
  std::vector<std::uint32_t> vals_;
  std::vector<std::size_t> counted_;
  int extra_dims_ = 0;
  std::size_t depth_ = 0, atoms_ = 0;
  long batch_slot_ = -1;
  std::unordered_map<const Node*, std::vector<RFMono>> polys_;
  std::vector<std::uint32_t> xs_;

  void check(const NodePtr& n, std::size_t depth) {
    depth_ = std::max(depth_, depth);
    if (n->kind == FormKind::Exists) {
      if (n->var_sort != Sort::RF) throw UnsupportedFormula("only RF quantifiers can be counted");
      ++depth;
    }
    if (n->kind == FormKind::Atom) {
      ++atoms_;
      if (n->lhs->sort != Sort::RF) throw UnsupportedFormula("atom is not a residue-field equation");
      std::function<void(const TermPtr&)> pure = [&](const TermPtr& t) {
        if (t->kind == TermKind::Ac) throw UnsupportedFormula("ac(...) in a residue-field count");
        for (const auto& a : t->args) pure(a);
      };
      pure(n->lhs);
      pure(n->rhs);
    }
    for (const auto& c : n->children) check(c, depth);
  }

  void compile(const NodePtr& n) {
    if (n->kind == FormKind::Atom) {
      MPoly p = detail_fm::expand(n->lhs, slots_, slots_.size(), {}) - detail_fm::expand(n->rhs, slots_, slots_.size(), {});
      std::vector<RFMono> monos;
      for (const auto& [e, c] : p.terms) monos.push_back({c.coeff(0).get_num(), e});
      polys_.emplace(n.get(), std::move(monos));
    }
    for (const auto& c : n->children) compile(c);
  }

  std::vector<std::uint8_t> eval(const NodePtr& n, std::size_t width) {
    switch (n->kind) {
      case FormKind::True: return std::vector<std::uint8_t>(width, 1);
      case FormKind::False: return std::vector<std::uint8_t>(width, 0);
      case FormKind::Atom: return atom(n, width);
      case FormKind::Not: {
        auto m = eval(n->children[0], width);
        for (auto& b : m) b ^= 1;
        return m;
      }
      case FormKind::And:
      case FormKind::Or: {
        const bool is_and = n->kind == FormKind::And;
        auto m = eval(n->children[0], width);
        for (std::size_t i = 1; i < n->children.size(); ++i) {
          auto o = eval(n->children[i], width);
          for (std::size_t j = 0; j < width; ++j) m[j] = is_and ? (m[j] & o[j]) : (m[j] | o[j]);
        }
        return m;
      }
      case FormKind::Exists: {
        const std::size_t slot = slots_.at(n->var);
        std::vector<std::uint8_t> m(width, 0);
        for (std::uint32_t u = 0; u < q_; ++u) {
          vals_[slot] = u;
          auto o = eval(n->children[0], width);
          std::size_t set = 0;
          for (std::size_t j = 0; j < width; ++j) set += (m[j] |= o[j]);
          if (set == width) break;
        }
        return m;
      }
    }
    return {};
  }

  std::vector<std::uint8_t> atom(const NodePtr& n, std::size_t width) {
    // Specialize every variable except the batch one, then evaluate in the batch variable.
    std::vector<std::uint32_t> coeffs(1, 0);
    for (const auto& m : polys_.at(n.get())) {
      Integer c = m.coeff % q_;
      if (c < 0) c += q_;
      std::uint64_t v = c.get_ui();
      unsigned batch_exp = 0;
      for (std::size_t i = 0; i < m.exps.size(); ++i) {
        if (!m.exps[i]) continue;
        if (static_cast<long>(i) == batch_slot_)
          batch_exp = m.exps[i];
        else
          v = v * powmod(vals_[i], m.exps[i], q_) % q_;
      }
      if (coeffs.size() <= batch_exp) coeffs.resize(batch_exp + 1, 0);
      coeffs[batch_exp] = static_cast<std::uint32_t>((coeffs[batch_exp] + v) % q_);
    }
    std::vector<std::uint32_t> out(width);
    kern::horner_mod(coeffs, std::span<const std::uint32_t>(xs_.data(), width), q_, out);
    std::vector<std::uint8_t> mask(width);
    const bool want_zero = n->rel == Rel::Eq;
    for (std::size_t j = 0; j < width; ++j) mask[j] = (out[j] == 0) == want_zero;
    return mask;
  }
};

}  // namespace

std::uint64_t count_rf_points(const Formula& f, std::uint32_t q, const CountOptions& opts) {
  return Counter(f, q, opts).run();
}

}  // namespace dpcalc::fm

namespace dpcalc::fm {

struct TermEvaluator::Impl {
  lf::LocalFieldSpec field;
  std::vector<std::string> names;
  CPoly poly;
};

TermEvaluator::TermEvaluator(const TermPtr& t, const lf::LocalFieldSpec& field) : impl_(std::make_unique<Impl>()) {
  if (t->sort != Sort::VF) throw SortError("integrand is not a VF term");
  field.validate();
  impl_->field = field;
  impl_->names = term_variables(t);
  std::map<std::string, std::size_t> slots;
  for (const auto& n : impl_->names) slots.emplace(n, slots.size());
  impl_->poly = compile_poly(detail_fm::expand(t, slots, slots.size(), {}), field);
}
TermEvaluator::~TermEvaluator() = default;
TermEvaluator::TermEvaluator(TermEvaluator&&) noexcept = default;

lf::LFElem TermEvaluator::eval(const Assignment& a) const {
  lf::LFElem acc = lf::LFElem::zero(impl_->field);
  std::vector<lf::LFElem> vals;
  for (const auto& n : impl_->names) {
    auto it = a.find(n);
    if (it == a.end() || it->second.index() != 0) throw UnboundVariable("no VF value for '" + n + "'");
    vals.push_back(std::get<lf::LFElem>(it->second));
  }
  for (const auto& m : impl_->poly.monos) {
    lf::LFElem v = m.coeff;
    for (const auto& [slot, e] : m.pows) v = lf::trunc::mul(v, lf::trunc::pow(vals[slot], e));
    acc = lf::trunc::add(acc, v);
  }
  return acc;
}

}  // namespace dpcalc::fm
