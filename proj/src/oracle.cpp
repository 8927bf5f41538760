#include "dpcalc/oracle.hpp"

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include "json.hpp"

namespace dpcalc::oracle {

std::string VolumeInterval::to_json() const {
  nlohmann::ordered_json j;
  j["lower"] = to_string(lower);
  j["upper"] = to_string(upper);
  j["precision"] = precision;
  j["boxes_total"] = boxes_total;
  j["boxes_true"] = boxes_true;
  j["boxes_undecided"] = boxes_undecided;
  return j.dump();
}

std::uint64_t default_box_budget() {
  if (const char* env = std::getenv("DPCALC_BOX_BUDGET")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) return v;
  }
  return 100000000ULL;
}

namespace {

using fm::Assignment;
using lf::LFElem;
using lf::LocalFieldSpec;

struct Verdict {
  bool decided = false;
  Rational lo, hi;  // density on the box (decided: lo == hi)
  bool positive = false;
};

using BoxFn = std::function<Verdict(const Assignment&, bool finest)>;

struct Acc {
  Rational lower, upper, undecided;
  std::uint64_t total = 0, trues = 0, undec = 0;
};

class BoxRunner {
 public:
  BoxRunner(const LocalFieldSpec& field, std::vector<std::string> vars, const OracleOptions& opts, BoxFn fn)
      : field_(field), vars_(std::move(vars)), opts_(opts), fn_(std::move(fn)) {
    field_.validate();
    const std::size_t m = vars_.size();
    inv_vol_.resize(static_cast<std::size_t>(field_.precision) * m + 1);
    for (std::size_t k = 0; k < inv_vol_.size(); ++k) inv_vol_[k] = rpow(field_.prime, -static_cast<long>(k));
  }

  VolumeInterval run() {
    const std::size_t m = vars_.size();
    Acc root;
    std::vector<std::vector<std::uint32_t>> digits(m);
    const bool refine = visit(digits, 0, root, /*recurse=*/false);
    std::vector<Acc> parts;
    if (refine) {
      const std::uint64_t children = ipow(field_.prime, m).get_ui();
      unsigned threads = opts_.threads ? opts_.threads : std::max(1u, std::thread::hardware_concurrency());
      threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, children));
      parts.resize(threads);
      std::vector<std::exception_ptr> errors(threads);
      auto work = [&](unsigned w) {
        try {
          std::vector<std::vector<std::uint32_t>> d(m, std::vector<std::uint32_t>(1));
          for (std::uint64_t c = w; c < children; c += threads) {
            std::uint64_t r = c;
            for (std::size_t i = 0; i < m; ++i) {
              d[i][0] = static_cast<std::uint32_t>(r % field_.prime);
              r /= field_.prime;
            }
            visit(d, 1, parts[w], true);
          }
        } catch (...) {
          errors[w] = std::current_exception();
          abort_.store(true);
        }
      };
      if (threads == 1) {
        work(0);
      } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    VolumeInterval out;
    out.precision = field_.precision;
    parts.push_back(root);
    for (const auto& a : parts) {
      out.lower += a.lower;
      out.upper += a.upper;
      out.undecided_mass += a.undecided;
      out.boxes_true += a.trues;
      out.boxes_undecided += a.undec;
    }
    out.boxes_total = evaluated_.load();
    return out;
  }

 private:
  LocalFieldSpec field_;
  std::vector<std::string> vars_;
  const OracleOptions& opts_;
  BoxFn fn_;
  std::vector<Rational> inv_vol_;
  std::atomic<std::uint64_t> evaluated_{0};
  std::atomic<bool> abort_{false};

  // Returns true when the box needs refinement (only reported when recurse is false).
  bool visit(std::vector<std::vector<std::uint32_t>>& digits, int level, Acc& acc, bool recurse) {
    if (abort_.load(std::memory_order_relaxed)) return false;
    if (evaluated_.fetch_add(1) + 1 > opts_.box_budget)
      throw BudgetExceeded("more than " + std::to_string(opts_.box_budget) + " boxes needed at precision " +
                           std::to_string(field_.precision));
    Assignment a = opts_.fixed;
    for (std::size_t i = 0; i < vars_.size(); ++i) a.insert_or_assign(vars_[i], LFElem::residue_box(field_, digits[i]));
    const bool finest = level >= field_.precision;
    const Verdict v = fn_(a, finest);
    const Rational& vol = inv_vol_[static_cast<std::size_t>(level) * vars_.size()];
    if (v.decided) {
      acc.lower += v.lo * vol;
      acc.upper += v.hi * vol;
      if (v.positive) ++acc.trues;
      return false;
    }
    if (finest) {
      acc.lower += v.lo * vol;
      acc.upper += v.hi * vol;
      acc.undecided += vol;
      ++acc.undec;
      return false;
    }
    if (!recurse) return true;
    const std::size_t m = vars_.size();
    const std::uint64_t children = ipow(field_.prime, m).get_ui();
    for (auto& d : digits) d.push_back(0);
    for (std::uint64_t c = 0; c < children; ++c) {
      std::uint64_t r = c;
      for (std::size_t i = 0; i < m; ++i) {
        digits[i].back() = static_cast<std::uint32_t>(r % field_.prime);
        r /= field_.prime;
      }
      visit(digits, level + 1, acc, true);
    }
    for (auto& d : digits) d.pop_back();
    return false;
  }
};

std::vector<std::string> integration_vars(const fm::Formula& phi, const fm::TermPtr& f, const OracleOptions& opts) {
  std::vector<std::string> vars;
  for (const auto& v : phi.free_vars())
    if (v.sort == fm::Sort::VF && !opts.fixed.count(v.name)) vars.push_back(v.name);
  if (f)
    for (const auto& n : fm::term_variables(f))
      if (!opts.fixed.count(n) && std::find(vars.begin(), vars.end(), n) == vars.end()) vars.push_back(n);
  return vars;
}

}  // namespace

VolumeInterval integrate(const Integrand& g, const fm::Formula& phi, const LocalFieldSpec& field,
                         const OracleOptions& opts) {
  if (g.f && g.e == 0) throw std::invalid_argument("integrand exponent must be positive");
  const fm::Interpreter interp(phi, field, fm::InterpretOptions{true});
  std::optional<fm::TermEvaluator> fe;
  if (g.f) fe.emplace(g.f, field);
  const std::uint32_t p = field.prime;
  const long e = static_cast<long>(g.e);
  BoxFn fn = [&](const Assignment& a, bool) {
    Verdict v;
    const fm::Truth3 t = interp.eval(a);
    if (t == fm::Truth3::False) {
      v.decided = true;
      return v;
    }
    if (!fe) {
      v.decided = t == fm::Truth3::True;
      v.positive = v.decided;
      v.lo = v.decided ? 1 : 0;
      v.hi = 1;
      return v;
    }
    const LFElem y = fe->eval(a);
    const auto [lo, hi] = lf::trunc::ord_bounds(y);
    if (lo.is_infinite()) {  // exactly zero
      v.decided = t == fm::Truth3::True;
      return v;
    }
    const Rational bound = rpow(p, -e * lo.value());
    if (t == fm::Truth3::True && lo == hi) {
      v.decided = true;
      v.positive = true;
      v.lo = v.hi = bound;
      return v;
    }
    v.hi = bound;
    return v;
  };
  return BoxRunner(field, integration_vars(phi, g.f, opts), opts, fn).run();
}

VolumeInterval volume(const fm::Formula& phi, const LocalFieldSpec& field, const OracleOptions& opts) {
  return integrate(Integrand{}, phi, field, opts);
}

Rational serre_oesterle_count(const fm::Formula& system, lf::FieldKind kind, std::uint32_t p, int N, int d,
                              const OracleOptions& opts) {
  const LocalFieldSpec field{kind, p, N};
  std::vector<fm::NodePtr> eqs =
      system.root()->kind == fm::FormKind::And ? system.root()->children : std::vector<fm::NodePtr>{system.root()};
  std::vector<fm::TermEvaluator> fs;
  for (const auto& n : eqs) {
    if (n->kind != fm::FormKind::Atom || n->rel != fm::Rel::Eq || n->lhs->sort != fm::Sort::VF)
      throw UnsupportedFormula("a polynomial system is a conjunction of VF equations");
    auto diff = std::make_shared<fm::Term>();
    diff->kind = fm::TermKind::Sub;
    diff->sort = fm::Sort::VF;
    diff->args = {n->lhs, n->rhs};
    fs.emplace_back(diff, field);
  }
  BoxFn fn = [&](const Assignment& a, bool finest) {
    Verdict v;
    v.decided = true;
    bool all = true;
    for (const auto& f : fs) {
      const auto [lo, hi] = lf::trunc::ord_bounds(f.eval(a));
      if (lo >= lf::ExtInt(N)) continue;
      all = false;
      if (lo == hi) return Verdict{true, 0, 0, false};  // ord < N on the whole box
      v.decided = false;
    }
    if (all) {
      v.lo = v.hi = 1;
      v.positive = true;
      return v;
    }
    if (finest) throw std::logic_error("integral polynomial undecided at full precision");
    return v;
  };
  std::vector<std::string> vars;
  for (const auto& v : system.free_vars())
    if (v.sort == fm::Sort::VF && !opts.fixed.count(v.name)) vars.push_back(v.name);
  const VolumeInterval vi = BoxRunner(field, vars, opts, fn).run();
  // count = lower * p^{N m}
  return vi.lower * rpow(p, static_cast<long>(N) * (static_cast<long>(vars.size()) - d));
}

fm::Formula scale_variable(const fm::Formula& phi, const std::string& var, const Rational& a) {
  if (a == 0) throw std::invalid_argument("scaling factor must be nonzero");
  std::function<fm::TermPtr(const fm::TermPtr&)> sub = [&](const fm::TermPtr& t) -> fm::TermPtr {
    if (t->kind == fm::TermKind::Var && t->name == var) {
      auto c = std::make_shared<fm::Term>();
      c->kind = fm::TermKind::Const;
      c->sort = fm::Sort::VF;
      c->value = a;
      auto d = std::make_shared<fm::Term>();
      d->kind = fm::TermKind::Div;
      d->sort = fm::Sort::VF;
      d->args = {t, c};
      return d;
    }
    auto out = std::make_shared<fm::Term>(*t);
    for (auto& x : out->args) x = sub(x);
    return out;
  };
  std::function<fm::NodePtr(const fm::NodePtr&)> walk = [&](const fm::NodePtr& n) -> fm::NodePtr {
    auto out = std::make_shared<fm::Node>(*n);
    if (out->lhs) out->lhs = sub(out->lhs);
    if (out->rhs) out->rhs = sub(out->rhs);
    for (auto& c : out->children) c = walk(c);
    return out;
  };
  return fm::Formula(walk(phi.root()), phi.free_vars());
}

std::pair<VolumeInterval, VolumeInterval> jacobian_check(const Rational& a, const fm::Formula& phi,
                                                         const LocalFieldSpec& field, const OracleOptions& opts,
                                                         std::string var) {
  if (var.empty()) {
    for (const auto& v : phi.free_vars())
      if (v.sort == fm::Sort::VF && !opts.fixed.count(v.name)) {
        var = v.name;
        break;
      }
  }
  if (var.empty()) throw std::invalid_argument("formula has no VF variable to scale");
  return {volume(phi, field, opts), volume(scale_variable(phi, var, a), field, opts)};
}

bool scaling_consistent(const std::pair<VolumeInterval, VolumeInterval>& r, const Rational& a, std::uint32_t p) {
  const Rational abs_a = rpow(p, -valuation(a, p));
  const Rational lo = abs_a * r.first.lower, hi = abs_a * r.first.upper;
  return !(hi < r.second.lower || r.second.upper < lo);
}

}  // namespace dpcalc::oracle
