#include "dpcalc/motivic.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <sstream>

#include "formula_internal.hpp"

namespace dpcalc::mot {

using fm::FormKind;
using fm::Node;
using fm::NodePtr;
using fm::Rel;
using fm::Sort;
using fm::Term;
using fm::TermKind;
using fm::TermPtr;
using pres::AffineForm;
using pres::PresDomain;
using pres::PresValue;
using pres::VarRange;

namespace {

NodePtr make_node(FormKind k) {
  auto n = std::make_shared<Node>();
  n->kind = k;
  return n;
}

NodePtr make_and(std::vector<NodePtr> parts) {
  if (parts.empty()) return make_node(FormKind::True);
  if (parts.size() == 1) return parts.front();
  auto n = std::make_shared<Node>();
  n->kind = FormKind::And;
  n->children = std::move(parts);
  return n;
}

TermPtr rf_const(const Rational& v) {
  auto t = std::make_shared<Term>();
  t->kind = TermKind::Const;
  t->sort = Sort::RF;
  t->value = v;
  return t;
}

NodePtr atom(Rel r, TermPtr a, TermPtr b) {
  auto n = std::make_shared<Node>();
  n->kind = FormKind::Atom;
  n->rel = r;
  n->lhs = std::move(a);
  n->rhs = std::move(b);
  return n;
}

void collect_term_vars(const TermPtr& t, std::map<std::string, Sort>& out) {
  if (t->kind == TermKind::Var) out.emplace(t->name, t->sort);
  for (const auto& a : t->args) collect_term_vars(a, out);
}

// Free variables of a node with their sorts.
void collect_vars(const NodePtr& n, std::set<std::string>& bound, std::map<std::string, Sort>& out) {
  if (n->kind == FormKind::Atom) {
    std::map<std::string, Sort> here;
    collect_term_vars(n->lhs, here);
    collect_term_vars(n->rhs, here);
    for (const auto& [k, s] : here)
      if (!bound.count(k)) out.emplace(k, s);
    return;
  }
  if (n->kind == FormKind::Exists) {
    const bool fresh = bound.insert(n->var).second;
    for (const auto& c : n->children) collect_vars(c, bound, out);
    if (fresh) bound.erase(n->var);
    return;
  }
  for (const auto& c : n->children) collect_vars(c, bound, out);
}

std::map<std::string, Sort> free_vars_of(const NodePtr& n) {
  std::set<std::string> bound;
  std::map<std::string, Sort> out;
  collect_vars(n, bound, out);
  return out;
}

TermPtr rename_term(const TermPtr& t, const std::map<std::string, std::string>& m) {
  if (t->kind == TermKind::Var) {
    auto it = m.find(t->name);
    if (it == m.end()) return t;
    auto c = std::make_shared<Term>(*t);
    c->name = it->second;
    return c;
  }
  if (t->args.empty()) return t;
  auto c = std::make_shared<Term>(*t);
  for (auto& a : c->args) a = rename_term(a, m);
  return c;
}

NodePtr rename_node(const NodePtr& n, const std::map<std::string, std::string>& m) {
  auto c = std::make_shared<Node>(*n);
  if (c->lhs) c->lhs = rename_term(c->lhs, m);
  if (c->rhs) c->rhs = rename_term(c->rhs, m);
  if (c->kind == FormKind::Exists && m.count(c->var)) c->var = m.at(c->var);
  for (auto& ch : c->children) ch = rename_node(ch, m);
  return c;
}

// ZZ term -> affine form
AffineForm to_affine(const TermPtr& t) {
  switch (t->kind) {
    case TermKind::Var:
      return AffineForm::var(t->name);
    case TermKind::Const:
      if (t->value.get_den() != 1 || !t->value.get_num().fits_slong_p())
        throw UnsupportedDomain("non-integer constant in a Presburger condition");
      return AffineForm(t->value.get_num().get_si());
    case TermKind::Add:
      return to_affine(t->args[0]) + to_affine(t->args[1]);
    case TermKind::Sub:
      return to_affine(t->args[0]) - to_affine(t->args[1]);
    case TermKind::Neg:
      return -to_affine(t->args[0]);
    case TermKind::Mul: {
      AffineForm a = to_affine(t->args[0]), b = to_affine(t->args[1]);
      if (a.is_constant()) return a.constant() * b;
      if (b.is_constant()) return b.constant() * a;
      throw UnsupportedDomain("product of integer variables");
    }
    default:
      throw UnsupportedFormula("only linear integer terms are allowed in a cell basis");
  }
}

struct Constraint {
  AffineForm f;  // f rel 0
  Rel rel;
  std::int64_t modulus = 0;
};

// Builds an iterated domain over `order` from constraints f rel 0 where every
// constraint is solved for the last variable of `order` it mentions.
struct DomainBuild {
  PresDomain domain;
  bool infeasible = false;
};

DomainBuild build_domain(const std::vector<Constraint>& cons, const std::vector<std::string>& order) {
  DomainBuild out;
  std::map<std::string, VarRange> ranges;
  for (const auto& v : order) ranges[v].name = v;
  auto set_bound = [&](std::optional<AffineForm>& slot, const AffineForm& b, bool lower, const std::string& v) {
    if (!slot) {
      slot = b;
    } else if (*slot == b) {
    } else if (slot->is_constant() && b.is_constant()) {
      slot = lower ? std::max(slot->constant(), b.constant()) : std::min(slot->constant(), b.constant());
    } else {
      throw UnsupportedDomain("several " + std::string(lower ? "lower" : "upper") + " bounds for " + v);
    }
  };
  for (const auto& c : cons) {
    std::string v;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      if (c.f.mentions(*it)) {
        v = *it;
        break;
      }
    if (v.empty()) {
      if (!c.f.is_constant()) continue;  // constraint on other variables: not ours
      const std::int64_t x = c.f.constant();
      bool ok = true;
      switch (c.rel) {
        case Rel::Eq: ok = x == 0; break;
        case Rel::Le: ok = x <= 0; break;
        case Rel::Lt: ok = x < 0; break;
        case Rel::Ge: ok = x >= 0; break;
        case Rel::Gt: ok = x > 0; break;
        case Rel::Congruent: ok = ((x % c.modulus) + c.modulus) % c.modulus == 0; break;
        default: break;
      }
      if (!ok) out.infeasible = true;
      continue;
    }
    const std::int64_t a = c.f.coeff(v);
    if (a != 1 && a != -1) throw UnsupportedDomain("coefficient " + std::to_string(a) + " of " + v + " is not +-1");
    // a*v + r rel 0  <=>  v rel' -a*r
    const AffineForm r = c.f - AffineForm::var(v, a);
    const AffineForm b = (-a) * r;
    Rel rel = c.rel;
    if (a < 0) {
      if (rel == Rel::Le) rel = Rel::Ge;
      else if (rel == Rel::Ge) rel = Rel::Le;
      else if (rel == Rel::Lt) rel = Rel::Gt;
      else if (rel == Rel::Gt) rel = Rel::Lt;
    }
    VarRange& vr = ranges[v];
    switch (rel) {
      case Rel::Eq:
        set_bound(vr.lower, b, true, v);
        set_bound(vr.upper, b, false, v);
        break;
      case Rel::Ge: set_bound(vr.lower, b, true, v); break;
      case Rel::Gt: set_bound(vr.lower, b + AffineForm(1), true, v); break;
      case Rel::Le: set_bound(vr.upper, b, false, v); break;
      case Rel::Lt: set_bound(vr.upper, b - AffineForm(1), false, v); break;
      case Rel::Congruent: {
        if (!b.is_constant()) throw UnsupportedDomain("congruence for " + v + " with a non-constant residue");
        if (vr.modulus != 1) throw UnsupportedDomain("several congruences for " + v);
        vr.modulus = c.modulus;
        vr.residue = ((b.constant() % c.modulus) + c.modulus) % c.modulus;
        break;
      }
      default:
        throw UnsupportedDomain("relation != is not supported in a Presburger condition");
    }
  }
  for (const auto& v : order) {
    const VarRange& vr = ranges[v];
    if (vr.lower || vr.upper || vr.modulus != 1) out.domain.vars.push_back(vr);
  }
  return out;
}

// A cell basis split into its residue-field part and its Presburger part.
struct Basis {
  std::vector<NodePtr> rf;
  std::vector<Constraint> zz;
  std::vector<std::string> rf_extras, zz_extras, rf_params, zz_params;
  PresDomain domain;  // over zz extras
  Guard guard;        // over zz params
  bool infeasible = false;
};

void flatten_and(const NodePtr& n, std::vector<NodePtr>& out) {
  if (n->kind == FormKind::And) {
    for (const auto& c : n->children) flatten_and(c, out);
  } else if (n->kind != FormKind::True) {
    out.push_back(n);
  }
}

Basis split_basis(const fm::Formula& basis, const std::vector<fm::Variable>& params) {
  Basis b;
  std::map<std::string, Sort> psort;
  for (const auto& p : params) psort[p.name] = p.sort;
  for (const auto& v : basis.free_vars()) {
    const bool is_param = psort.count(v.name) > 0;
    if (v.sort == Sort::VF) throw UnsupportedFormula("cell basis mentions the valued-field variable " + v.name);
    auto& list = v.sort == Sort::RF ? (is_param ? b.rf_params : b.rf_extras) : (is_param ? b.zz_params : b.zz_extras);
    list.push_back(v.name);
  }
  std::vector<NodePtr> parts;
  flatten_and(basis.root(), parts);
  for (const auto& n : parts) {
    if (n->kind == FormKind::False) {
      b.infeasible = true;
      continue;
    }
    const auto vars = free_vars_of(n);
    bool zz = false, vf = false;
    for (const auto& [k, s] : vars) {
      zz = zz || s == Sort::ZZ;
      vf = vf || s == Sort::VF;
    }
    if (vf) throw UnsupportedFormula("cell basis mentions a valued-field variable");
    if (n->kind == FormKind::Atom && n->lhs->sort == Sort::ZZ) zz = true;
    if (!zz) {
      b.rf.push_back(n);
      continue;
    }
    if (n->kind != FormKind::Atom)
      throw UnsupportedFormula("integer conditions in a cell basis must be top-level atoms");
    if (n->rel == Rel::Ne) throw UnsupportedDomain("relation != is not supported in a Presburger condition");
    b.zz.push_back({to_affine(n->lhs) - to_affine(n->rhs), n->rel, n->modulus});
  }
  std::vector<std::string> all = b.zz_params;
  all.insert(all.end(), b.zz_extras.begin(), b.zz_extras.end());
  DomainBuild dom = build_domain(b.zz, b.zz_extras);
  std::vector<Constraint> on_params;
  for (const auto& c : b.zz) {
    bool extra = false;
    for (const auto& e : b.zz_extras) extra = extra || c.f.mentions(e);
    if (!extra) on_params.push_back(c);
  }
  // order parameters as declared
  std::vector<std::string> porder;
  for (const auto& p : params)
    if (p.sort == Sort::ZZ) porder.push_back(p.name);
  DomainBuild g = build_domain(on_params, porder);
  b.domain = dom.domain;
  b.guard.domain = g.domain;
  b.infeasible = b.infeasible || dom.infeasible || g.infeasible;
  return b;
}

fm::Formula class_formula(const std::vector<NodePtr>& rf, const std::vector<fm::Variable>& params) {
  NodePtr root = make_and(rf);
  const auto vars = free_vars_of(root);
  std::vector<fm::Variable> fv;
  for (const auto& p : params)
    if (p.sort == Sort::RF && vars.count(p.name)) fv.push_back(p);
  for (const auto& [k, s] : vars) {
    bool is_param = false;
    for (const auto& p : params) is_param = is_param || p.name == k;
    if (!is_param) fv.push_back({k, s});
  }
  return fm::Formula(root, fv);
}

fm::Formula true_formula() { return fm::Formula(make_node(FormKind::True), {}); }

std::uint32_t mod_q(const Rational& r, std::uint32_t q) {
  mpz_class den = r.get_den() % q;
  if (den == 0) throw BadPrime("denominator of " + to_string(r) + " vanishes mod " + std::to_string(q));
  mpz_class inv;
  mpz_invert(inv.get_mpz_t(), den.get_mpz_t(), mpz_class(q).get_mpz_t());
  mpz_class v = (r.get_num() * inv) % q;
  if (v < 0) v += q;
  return static_cast<std::uint32_t>(v.get_ui());
}

std::set<std::string> counted_vars(const fm::Formula& f, const std::vector<fm::Variable>& params) {
  std::set<std::string> out;
  for (const auto& v : f.free_vars()) {
    bool is_param = false;
    for (const auto& p : params) is_param = is_param || p.name == v.name;
    if (!is_param) out.insert(v.name);
  }
  return out;
}

std::uint64_t count_class(const fm::Formula& cls, const std::vector<fm::Variable>& params, std::uint32_t q,
                          const std::map<std::string, std::uint32_t>& rf) {
  fm::CountOptions co;
  for (const auto& v : cls.free_vars()) {
    bool is_param = false;
    for (const auto& p : params) is_param = is_param || p.name == v.name;
    if (is_param) {
      auto it = rf.find(v.name);
      if (it == rf.end()) throw UnboundParameter("no value for residue parameter " + v.name);
      co.fixed[v.name] = it->second % q;
    } else {
      co.counted.push_back(v.name);
    }
  }
  if (co.counted.empty() && co.fixed.empty() && cls.root()->kind == FormKind::True) return 1;
  return fm::count_rf_points(cls, q, co);
}

std::vector<std::uint32_t> primes_upto(std::uint32_t n) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t p = 2; p <= n; ++p)
    if (is_prime(p)) out.push_back(p);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Guard / ConstructibleFn

bool Guard::holds(const pres::Assignment& zz) const {
  for (const auto& v : domain.vars)
    if (!zz.count(v.name)) throw UnboundParameter("no value for integer parameter " + v.name);
  return domain.contains(zz);
}

std::string Guard::str() const {
  std::string out;
  for (const auto& v : domain.vars) {
    if (!out.empty()) out += ", ";
    if (v.lower) out += v.lower->str() + " <= ";
    out += v.name;
    if (v.upper) out += " <= " + v.upper->str();
    if (v.modulus != 1) out += " (" + std::to_string(v.residue) + " mod " + std::to_string(v.modulus) + ")";
  }
  return out;
}

ConstructibleFn ConstructibleFn::constant(const PresValue& v, std::vector<fm::Variable> rf_params) {
  ConstructibleFn f(std::move(rf_params));
  f.add(true_formula(), Guard{}, v);
  return f;
}

void ConstructibleFn::add(const fm::Formula& rf_class, const Guard& guard, const PresValue& coeff) {
  if (coeff.is_zero()) return;
  if (rf_class.root()->kind == FormKind::False) return;
  Key k{fm::pretty_print(rf_class), guard.str()};
  auto it = terms_.find(k);
  if (it == terms_.end()) {
    terms_.emplace(k, Entry{rf_class.root(), rf_class.free_vars(), guard, coeff});
    return;
  }
  it->second.coeff = it->second.coeff + coeff;
  if (it->second.coeff.is_zero()) terms_.erase(it);
}

ConstructibleFn& ConstructibleFn::operator+=(const ConstructibleFn& o) {
  for (const auto& p : o.rf_params_) {
    bool have = false;
    for (const auto& q : rf_params_) have = have || q.name == p.name;
    if (!have) rf_params_.push_back(p);
  }
  for (const auto& [k, e] : o.terms_) add(fm::Formula(e.root, e.vars), e.guard, e.coeff);
  return *this;
}

bool operator==(const ConstructibleFn& a, const ConstructibleFn& b) {
  if (a.terms_.size() != b.terms_.size()) return false;
  for (auto i = a.terms_.begin(), j = b.terms_.begin(); i != a.terms_.end(); ++i, ++j)
    if (!(i->first == j->first) || !(i->second.coeff == j->second.coeff)) return false;
  return true;
}

std::vector<CFTerm> ConstructibleFn::terms() const {
  std::vector<CFTerm> out;
  for (const auto& [k, e] : terms_) out.push_back({fm::Formula(e.root, e.vars), e.guard, e.coeff});
  return out;
}

std::optional<SymA> ConstructibleFn::as_symbolic() const {
  if (terms_.empty()) return SymA();
  if (terms_.size() != 1) return std::nullopt;
  const Entry& e = terms_.begin()->second;
  if (e.root->kind != FormKind::True || !e.guard.empty() || !e.coeff.is_closed()) return std::nullopt;
  return e.coeff.closed();
}

ConstructibleFn ConstructibleFn::partial_eval(const pres::Assignment& zz) const {
  ConstructibleFn out(rf_params_);
  for (const auto& [k, e] : terms_) {
    Guard g = e.guard;
    bool all = true;
    for (const auto& v : g.domain.vars) all = all && zz.count(v.name);
    if (all && !g.domain.vars.empty()) {
      if (!g.domain.contains(zz)) continue;
      g = Guard{};
    }
    out.add(fm::Formula(e.root, e.vars), g, e.coeff.partial_eval(zz));
  }
  return out;
}

std::string ConstructibleFn::str() const {
  if (terms_.empty()) return "0";
  std::string out;
  for (const auto& [k, e] : terms_) {
    if (!out.empty()) out += " + ";
    const bool plain = e.root->kind == FormKind::True && e.vars.empty();
    out += plain ? "" : "[" + k.cls + "] * ";
    out += "(" + e.coeff.str() + ")";
    if (!e.guard.empty()) out += " if " + k.guard;
  }
  return out;
}

Rational specialize(const ConstructibleFn& f, std::uint32_t q, const ParamValues& params,
                    const std::set<std::uint64_t>& bad) {
  if (!is_prime(q)) throw InvalidPrime(std::to_string(q) + " is not prime");
  if (bad.count(q)) throw BadPrime(std::to_string(q) + " is a bad prime for this result");
  Rational total;
  for (const auto& t : f.terms()) {
    if (!t.guard.holds(params.zz)) continue;
    const std::uint64_t n = count_class(t.rf_class, f.rf_params(), q, params.rf);
    if (n == 0) continue;
    total += Rational(static_cast<unsigned long>(n)) * t.coeff.nu_q(params.zz, Rational(q));
  }
  return total;
}

std::optional<std::vector<CongruenceCase>> realize_by_congruence(const ConstructibleFn& f,
                                                                 const std::map<std::string, Rational>& rf_params,
                                                                 const std::set<std::uint64_t>& bad,
                                                                 std::uint32_t max_modulus) {
  const auto terms = f.terms();
  for (const auto& t : terms) {
    if (!t.guard.empty()) throw UnboundParameter("guarded term: assign the integer parameters first");
    if (!t.coeff.is_closed()) throw UnboundParameter("coefficient " + t.coeff.str() + " still has parameters");
  }
  const auto primes = primes_upto(2000);
  for (std::uint32_t m = 1; m <= max_modulus; ++m) {
    std::vector<CongruenceCase> cases;
    bool ok = true;
    for (std::uint32_t r = 0; r < m && ok; ++r) {
      if (std::gcd(r, m) != 1 && m != 1) continue;
      SymA value;
      for (const auto& t : terms) {
        const std::size_t deg = counted_vars(t.rf_class, f.rf_params()).size();
        const std::size_t need = deg + 3;
        std::vector<std::pair<Rational, Rational>> pts;
        for (std::uint32_t p : primes) {
          if (p < 5 || p % m != r % m || bad.count(p) || m % p == 0) continue;
          std::map<std::string, std::uint32_t> rf;
          for (const auto& [k, v] : rf_params) rf[k] = mod_q(v, p);
          pts.emplace_back(Rational(p), Rational(static_cast<unsigned long>(count_class(t.rf_class, f.rf_params(), p, rf))));
          if (pts.size() == need) break;
        }
        if (pts.size() < need) {
          ok = false;
          break;
        }
        // Lagrange interpolation through the first deg + 1 points
        UPoly poly;
        for (std::size_t i = 0; i <= deg; ++i) {
          UPoly basis = UPoly::constant(1);
          Rational den = 1;
          for (std::size_t j = 0; j <= deg; ++j) {
            if (j == i) continue;
            basis = basis * UPoly(std::vector<Rational>{-pts[j].first, 1});
            den *= pts[i].first - pts[j].first;
          }
          poly = poly + (pts[i].second / den) * basis;
        }
        for (std::size_t i = deg + 1; i < pts.size(); ++i)
          if (poly.eval(pts[i].first) != pts[i].second) ok = false;
        if (!ok) break;
        value += SymA::from_parts(0, poly, {}) * t.coeff.closed();
      }
      if (ok) cases.push_back({m, m == 1 ? 0 : r, value});
    }
    if (ok) return cases;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// symbolic classes

std::optional<SymA> symbolic_class(const fm::Formula& rf_class, const std::vector<fm::Variable>& params,
                                   fm::BadPrimes* log) {
  const auto counted = counted_vars(rf_class, params);
  if (counted.size() != rf_class.free_vars().size()) return std::nullopt;  // depends on a parameter
  std::vector<NodePtr> parts;
  flatten_and(rf_class.root(), parts);
  struct PerVar {
    std::set<Rational> ne;
    std::optional<Rational> eq;
    bool empty = false;
  };
  std::map<std::string, PerVar> per;
  auto as_const = [](const TermPtr& t) -> std::optional<Rational> {
    if (t->kind == TermKind::Const) return t->value;
    if (t->kind == TermKind::Neg && t->args[0]->kind == TermKind::Const) return -t->args[0]->value;
    return std::nullopt;
  };
  for (const auto& n : parts) {
    if (n->kind == FormKind::False) return SymA();
    if (n->kind != FormKind::Atom || (n->rel != Rel::Eq && n->rel != Rel::Ne)) return std::nullopt;
    TermPtr v = n->lhs;
    std::optional<Rational> c = as_const(n->rhs);
    if (!c) {
      v = n->rhs;
      c = as_const(n->lhs);
    }
    // a*v == c with a constant a
    if (v->kind == TermKind::Mul && v->args.size() == 2 && c) {
      const auto a = as_const(v->args[0]);
      if (a && *a != 0) {
        if (log)
          for (auto p : fm::detail_fm::prime_factors(a->get_num())) log->add(p, "coefficient " + to_string(*a));
        c = *c / *a;
        v = v->args[1];
      }
    }
    if (v->kind != TermKind::Var || !c || !counted.count(v->name)) return std::nullopt;
    PerVar& pv = per[v->name];
    if (n->rel == Rel::Ne) {
      pv.ne.insert(*c);
    } else if (pv.eq && *pv.eq != *c) {
      pv.empty = true;
    } else {
      pv.eq = *c;
    }
  }
  SymA out(1);
  for (const auto& name : counted) {
    PerVar& pv = per[name];
    std::vector<Rational> consts(pv.ne.begin(), pv.ne.end());
    if (pv.eq) consts.push_back(*pv.eq);
    // distinct rationals stay distinct modulo good primes only
    if (log) {
      for (std::size_t i = 0; i < consts.size(); ++i) {
        for (auto p : fm::detail_fm::prime_factors(consts[i].get_den()))
          log->add(p, "denominator of residue constant " + to_string(consts[i]));
        for (std::size_t j = i + 1; j < consts.size(); ++j) {
          const Rational d = consts[i] - consts[j];
          for (auto p : fm::detail_fm::prime_factors(d.get_num()))
            log->add(p, "residue constants " + to_string(consts[i]) + " and " + to_string(consts[j]) + " collide");
          for (auto p : fm::detail_fm::prime_factors(d.get_den()))
            log->add(p, "residue constants " + to_string(consts[i]) + " and " + to_string(consts[j]) + " collide");
        }
      }
    }
    if (pv.empty) return SymA();
    if (pv.eq) {
      if (pv.ne.count(*pv.eq)) return SymA();
      continue;
    }
    out = out * (SymA::L() - SymA(static_cast<long>(pv.ne.size())));
  }
  return out;
}

// ---------------------------------------------------------------------------
// centers

std::optional<Rational> Center::constant() const {
  if (!term) return std::nullopt;
  if (term->kind == TermKind::Const) return term->value;
  if (term->kind == TermKind::Neg && term->args[0]->kind == TermKind::Const) return -term->args[0]->value;
  return std::nullopt;
}

Center parse_center(const std::string& text, const std::string& variable) {
  Center c;
  c.text = text;
  std::string s = text;
  s.erase(0, s.find_first_not_of(" \t"));
  if (s.rfind("root(", 0) == 0) {
    const auto close = s.rfind(')');
    if (close == std::string::npos) throw CellFormatError("unterminated root(...) center: " + text);
    std::string inner = s.substr(5, close - 5);
    const auto semi = inner.find(';');
    if (semi == std::string::npos) throw CellFormatError("root center needs 'poly; selector': " + text);
    fm::ParseOptions po;
    po.predeclared.push_back({variable, Sort::VF});
    c.root_poly = fm::parse_vf_term(inner.substr(0, semi), po);
    c.root_selector = inner.substr(semi + 1);
    c.root_selector.erase(0, c.root_selector.find_first_not_of(" \t"));
    return c;
  }
  c.term = fm::parse_vf_term(text);
  return c;
}

namespace {

long term_degree(const TermPtr& t) {
  constexpr long kBig = 1 << 20;
  switch (t->kind) {
    case TermKind::Var: return 1;
    case TermKind::Const:
    case TermKind::Unif: return 0;
    case TermKind::Add:
    case TermKind::Sub: return std::max(term_degree(t->args[0]), term_degree(t->args[1]));
    case TermKind::Mul: return term_degree(t->args[0]) + term_degree(t->args[1]);
    case TermKind::Neg: return term_degree(t->args[0]);
    case TermKind::Div: return term_degree(t->args[1]) == 0 ? term_degree(t->args[0]) : kBig;
    case TermKind::Pow: return term_degree(t->args[0]) * static_cast<long>(t->exponent);
    default: return kBig;
  }
}

UPoly to_upoly(const TermPtr& t, const std::string& var, const std::map<std::string, Rational>& subs,
               const Rational& unif) {
  switch (t->kind) {
    case TermKind::Var:
      if (t->name == var) return UPoly::monomial(1, 1);
      return UPoly::constant(subs.at(t->name));
    case TermKind::Unif: return UPoly::constant(unif);
    case TermKind::Const: return UPoly::constant(t->value);
    case TermKind::Add: return to_upoly(t->args[0], var, subs, unif) + to_upoly(t->args[1], var, subs, unif);
    case TermKind::Sub: return to_upoly(t->args[0], var, subs, unif) - to_upoly(t->args[1], var, subs, unif);
    case TermKind::Mul: return to_upoly(t->args[0], var, subs, unif) * to_upoly(t->args[1], var, subs, unif);
    case TermKind::Neg: return -to_upoly(t->args[0], var, subs, unif);
    case TermKind::Pow: return pow(to_upoly(t->args[0], var, subs, unif), t->exponent);
    case TermKind::Div: {
      UPoly d = to_upoly(t->args[1], var, subs, unif);
      if (d.degree() != 0) throw UnsupportedFormula("division by a non-constant in a root center");
      return (1 / d.lead()) * to_upoly(t->args[0], var, subs, unif);
    }
    default: throw UnsupportedFormula("ord/ac inside a root center polynomial");
  }
}

Rational determinant(std::vector<std::vector<Rational>> m) {
  const std::size_t n = m.size();
  Rational det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    while (piv < n && m[piv][c] == 0) ++piv;
    if (piv == n) return 0;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      if (m[r][c] == 0) continue;
      const Rational f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return det;
}

Rational resultant(const UPoly& f, const UPoly& g) {
  const long n = f.degree(), m = g.degree();
  const std::size_t sz = static_cast<std::size_t>(n + m);
  std::vector<std::vector<Rational>> s(sz, std::vector<Rational>(sz));
  for (long i = 0; i < m; ++i)
    for (long j = 0; j <= n; ++j) s[static_cast<std::size_t>(i)][static_cast<std::size_t>(i + j)] = f.coeff(static_cast<std::size_t>(n - j));
  for (long i = 0; i < n; ++i)
    for (long j = 0; j <= m; ++j)
      s[static_cast<std::size_t>(m + i)][static_cast<std::size_t>(i + j)] = g.coeff(static_cast<std::size_t>(m - j));
  return determinant(std::move(s));
}

// Primes at which roots of the center polynomial may collide or escape O:
// gcd over sample parameter values of the discriminant and the leading coefficient.
void root_center_primes(const Center& c, const std::string& var, fm::BadPrimes& log) {
  std::vector<std::string> others;
  for (const auto& n : fm::term_variables(c.root_poly))
    if (n != var) others.push_back(n);
  Integer g_disc = 0, g_lead = 0;
  for (long s = 2; s <= 9; ++s) {
    std::map<std::string, Rational> subs;
    for (std::size_t i = 0; i < others.size(); ++i) subs[others[i]] = Rational(s + 3 * static_cast<long>(i));
    const UPoly f = to_upoly(c.root_poly, var, subs, Rational(s + 1));
    if (f.degree() < 1) continue;
    for (const auto& co : f.coeffs())
      for (auto p : fm::detail_fm::prime_factors(co.get_den())) log.add(p, "denominator in center " + c.text);
    const Rational lead = f.lead();
    g_lead = gcd(g_lead, Integer(lead.get_num()));
    if (f.degree() >= 2) {
      const Rational d = resultant(f, f.derivative()) / lead;
      g_disc = gcd(g_disc, Integer(d.get_num()));
    }
  }
  for (auto p : fm::detail_fm::prime_factors(g_disc)) log.add(p, "discriminant of center " + c.text);
  for (auto p : fm::detail_fm::prime_factors(g_lead)) log.add(p, "leading coefficient of center " + c.text);
}

struct Prepared {
  const Cell* cell;
  Basis basis;
};

void check_signatures(const Prepared& a, const Prepared& b, const CellOptions& opts, const std::set<std::uint64_t>& bad) {
  // α separation on sample parameter values
  std::vector<std::string> zz_params;
  for (const auto& p : opts.parameters)
    if (p.sort == Sort::ZZ) zz_params.push_back(p.name);
  constexpr int kWindow = 24;
  auto alpha_values = [&](const Prepared& c, const pres::Assignment& params) {
    std::set<std::int64_t> vals;
    if (!c.basis.guard.domain.contains(params)) return vals;
    const auto& ex = c.basis.zz_extras;
    std::vector<std::int64_t> idx(ex.size(), -kWindow);
    while (true) {
      pres::Assignment pt = params;
      for (std::size_t i = 0; i < ex.size(); ++i) pt[ex[i]] = idx[i];
      if (c.basis.domain.contains(pt)) vals.insert(c.cell->alpha->eval(pt));
      std::size_t i = 0;
      while (i < idx.size() && ++idx[i] > kWindow) idx[i++] = -kWindow;
      if (i == idx.size()) break;
    }
    return vals;
  };
  bool alpha_separated = true;
  std::vector<std::int64_t> pidx(zz_params.size(), 0);
  while (alpha_separated) {
    pres::Assignment params;
    for (std::size_t i = 0; i < zz_params.size(); ++i) params[zz_params[i]] = pidx[i];
    const auto va = alpha_values(a, params), vb = alpha_values(b, params);
    for (auto v : va)
      if (vb.count(v)) alpha_separated = false;
    std::size_t i = 0;
    while (i < pidx.size() && ++pidx[i] > 3) pidx[i++] = 0;
    if (i == pidx.size()) break;
  }
  if (alpha_separated) return;
  // ξ separation: no common angular component at sample primes
  std::map<std::string, std::string> ren;
  std::vector<NodePtr> both = a.basis.rf;
  for (const auto& v : b.basis.rf_extras) ren[v] = v + "_2";
  for (const auto& n : b.basis.rf) both.push_back(rename_node(n, ren));
  both.push_back(atom(Rel::Eq, a.cell->xi, rename_term(b.cell->xi, ren)));
  both.push_back(atom(Rel::Ne, a.cell->xi, rf_const(0)));
  const fm::Formula meet = class_formula(both, opts.parameters);
  std::vector<std::string> rfp;
  for (const auto& v : meet.free_vars())
    for (const auto& p : opts.parameters)
      if (p.name == v.name) rfp.push_back(v.name);
  for (std::uint32_t q : {5u, 7u, 11u}) {
    if (bad.count(q)) continue;
    std::vector<std::uint32_t> vals(rfp.size(), 0);
    while (true) {
      std::map<std::string, std::uint32_t> rf;
      for (std::size_t i = 0; i < rfp.size(); ++i) rf[rfp[i]] = vals[i];
      if (count_class(meet, opts.parameters, q, rf) != 0)
        throw OverlapDetected("cells '" + a.cell->id + "' and '" + b.cell->id + "' share center " +
                              a.cell->center.text + " and their (ord, ac) signatures meet over F_" + std::to_string(q));
      std::size_t i = 0;
      while (i < vals.size() && ++vals[i] >= q) vals[i++] = 0;
      if (i == vals.size()) break;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// integration

pres::PresDomain parameter_domain(const fm::Formula& conditions, const std::vector<fm::Variable>& params) {
  const Basis b = split_basis(conditions, params);
  if (!b.rf.empty() || !b.zz_extras.empty() || !b.rf_extras.empty())
    throw UnsupportedDomain("parameter conditions may only mention integer parameters");
  if (b.infeasible) throw UnsupportedDomain("parameter conditions are unsatisfiable");
  return b.guard.domain;
}

std::set<std::uint64_t> IntegrationResult::bad_prime_set() const {
  std::set<std::uint64_t> out;
  for (const auto& [p, r] : bad_primes) out.insert(p);
  return out;
}

IntegrationResult integrate_cells(const std::vector<Cell>& cells, const CellOptions& opts) {
  IntegrationResult res;
  res.value = ConstructibleFn([&] {
    std::vector<fm::Variable> rf;
    for (const auto& p : opts.parameters)
      if (p.sort == Sort::RF) rf.push_back(p);
    return rf;
  }());
  fm::BadPrimes log;
  bool any_one = false;
  for (const auto& c : cells) any_one = any_one || c.kind == CellKind::OneCell;
  if (any_one && opts.zero_dimensional) throw std::invalid_argument("1-cells in a relative dimension 0 integral");

  std::vector<Prepared> prep;
  std::set<std::string> ids;
  for (const auto& c : cells) {
    if (!ids.insert(c.id).second) throw CellFormatError("duplicate cell id " + c.id);
    Prepared p{&c, split_basis(c.basis, opts.parameters)};
    for (const auto& [q, why] : fm::bad_primes(c.basis))
      for (const auto& w : why) log.add(q, "cell " + c.id + ": " + w);
    if (c.kind == CellKind::OneCell) {
      if (!c.alpha || !c.xi) throw CellFormatError("1-cell " + c.id + " needs alpha and xi");
      for (const auto& [name, k] : c.alpha->coeffs()) {
        bool ok = std::find(p.basis.zz_extras.begin(), p.basis.zz_extras.end(), name) != p.basis.zz_extras.end();
        for (const auto& q : opts.parameters) ok = ok || (q.name == name && q.sort == Sort::ZZ);
        if (!ok) throw CellFormatError("alpha of cell " + c.id + " mentions unknown variable " + name);
      }
    } else {
      if (c.alpha || c.xi) throw CellFormatError("0-cell " + c.id + " has alpha or xi");
      if (!p.basis.zz_extras.empty()) throw CellFormatError("0-cell " + c.id + " has extra integer variables");
      if (!c.center.term || term_degree(c.center.term) > 1)
        throw UnsupportedZeroCell("0-cell " + c.id + " has a non-affine center " + c.center.text);
    }
    if (c.center.root_poly) root_center_primes(c.center, opts.variable, log);
    if (auto k = c.center.constant())
      for (auto q : fm::detail_fm::prime_factors(k->get_den())) log.add(q, "denominator of center " + c.center.text);
    prep.push_back(std::move(p));
  }
  // distinct constant centers must stay distinct mod p
  std::map<Rational, std::string> consts;
  for (const auto& c : cells)
    if (auto k = c.center.constant()) consts.emplace(*k, c.center.text);
  for (auto i = consts.begin(); i != consts.end(); ++i)
    for (auto j = std::next(i); j != consts.end(); ++j) {
      const Rational d = j->first - i->first;
      for (auto q : fm::detail_fm::prime_factors(d.get_num()))
        log.add(q, "centers " + i->second + " and " + j->second + " meet mod p");
    }

  // signature separation for cells with a common center
  const auto snapshot = log.primes();
  for (std::size_t i = 0; i < prep.size(); ++i)
    for (std::size_t j = i + 1; j < prep.size(); ++j) {
      const Cell& a = *prep[i].cell;
      const Cell& b = *prep[j].cell;
      if (a.kind != CellKind::OneCell || b.kind != CellKind::OneCell || a.center.text != b.center.text) continue;
      if (prep[i].basis.infeasible || prep[j].basis.infeasible) continue;
      check_signatures(prep[i], prep[j], opts, snapshot);
    }

  for (const auto& p : prep) {
    const Cell& c = *p.cell;
    ConstructibleFn contrib(res.value.rf_params());
    if (!p.basis.infeasible) {
      std::vector<NodePtr> rf = p.basis.rf;
      PresValue coeff;
      if (c.kind == CellKind::OneCell) {
        rf.push_back(atom(Rel::Ne, c.xi, rf_const(0)));
        const PresValue integrand = c.psi * PresValue(SymA(1), -*c.alpha - AffineForm(1));
        try {
          coeff = p.basis.domain.vars.empty() ? integrand : pres::sum(p.basis.domain, integrand);
        } catch (const NotSummable& e) {
          throw NotSummable("cell " + c.id + ": " + e.what());
        }
      } else if (opts.zero_dimensional) {
        coeff = c.psi;
      }
      fm::Formula cls = class_formula(rf, opts.parameters);
      if (auto a = symbolic_class(cls, opts.parameters, &log)) {
        contrib.add(true_formula(), p.basis.guard, coeff * PresValue(*a));
      } else {
        contrib.add(cls, p.basis.guard, coeff);
      }
    }
    res.value += contrib;
    res.derivation.push_back({c.id, contrib});
  }
  res.bad_primes = log.snapshot();
  return res;
}

namespace {

Cell make_cell(const std::string& id, const std::string& basis, const std::string& center, const std::string& alpha,
               const std::string& xi, const PresValue& psi) {
  Cell c;
  c.id = id;
  fm::ParseOptions po;
  po.default_sort = Sort::RF;
  c.basis = fm::parse(basis, po);
  c.center = parse_center(center, "t");
  c.alpha = AffineForm::parse(alpha);
  fm::ParseOptions xo = po;
  xo.predeclared = c.basis.free_vars();
  c.xi = fm::parse(xi + " != 0", xo).root()->lhs;
  c.psi = psi;
  return c;
}

}  // namespace

IntegrationResult integrate_linear_product(const std::vector<Rational>& centers,
                                           const std::vector<unsigned>& multiplicities, unsigned e) {
  if (centers.size() != multiplicities.size()) throw std::invalid_argument("one multiplicity per center");
  if (e == 0) throw std::invalid_argument("exponent must be positive");
  std::set<Rational> seen;
  for (const auto& c : centers)
    if (!seen.insert(c).second) throw DuplicateCenter("center " + to_string(c) + " is listed twice");
  for (auto m : multiplicities)
    if (m == 0) throw std::invalid_argument("multiplicities must be positive");

  std::vector<Cell> cells;
  std::string generic = "rf eta; eta != 0";
  for (const auto& c : centers)
    if (c != 0) generic += " && " + (c.get_den() == 1 ? std::string("eta") : c.get_den().get_str() + "*eta") + " != (" + c.get_num().get_str() + ")";
  // units away from every center residue
  cells.push_back(make_cell("generic-units", generic, "0", "0", "eta", PresValue(SymA(1))));
  if (!seen.count(0)) cells.push_back(make_cell("generic-ball", "rf eta; zz g; eta != 0 && g >= 1", "0", "g", "eta", PresValue(SymA(1))));
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const std::int64_t em = static_cast<std::int64_t>(e) * multiplicities[j];
    cells.push_back(make_cell("ball-" + std::to_string(j), "rf eta; zz g; eta != 0 && g >= 1", centers[j].get_str(), "g",
                              "eta", PresValue(SymA(1), AffineForm::var("g", -em))));
  }
  CellOptions o;
  return integrate_cells(cells, o);
}

}  // namespace dpcalc::mot
