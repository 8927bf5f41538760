#pragma once

// Three-sorted formulas (valued field VF, residue field RF, value group ZZ):
// AST, parser, printer, finite-precision interpretation, and residue-field
// point counting.
//
// Concrete syntax:
//   vf x, y; rf u; zz n;  ord(x) >= 2 && exists w:rf. w^2 == ac(y) && n == ord(y) mod 3
// `t` is the uniformizer unless declared as a variable (`unif` always is),
// `inf` is the ZZ infinity, `forall` is read as !exists!. Lines starting
// with `#` are comments.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dpcalc/localfield.hpp"
#include "dpcalc/upoly.hpp"

namespace dpcalc::fm {

enum class Sort { VF, RF, ZZ };
std::string sort_name(Sort s);

struct Span {
  int line = 0;
  int column = 0;
};

enum class TermKind { Var, Unif, Const, Inf, Add, Sub, Mul, Div, Neg, Pow, Ord, Ac };

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct Term {
  TermKind kind;
  Sort sort = Sort::VF;
  std::string name;     // Var
  Rational value;       // Const
  unsigned exponent = 0;  // Pow
  std::vector<TermPtr> args;
  Span span;
};

enum class FormKind { True, False, Atom, Not, And, Or, Exists };
enum class Rel { Eq, Ne, Le, Lt, Ge, Gt, Congruent };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  FormKind kind;
  // Atom
  Rel rel = Rel::Eq;
  TermPtr lhs, rhs;
  std::int64_t modulus = 0;  // Congruent
  // Not / And / Or / Exists
  std::vector<NodePtr> children;
  std::string var;  // Exists
  Sort var_sort = Sort::VF;
  Span span;
};

/// Primes excluded by the formula or by symbolic manipulations downstream.
/// Append-only; merging is commutative.
class BadPrimes {
 public:
  void add(std::uint64_t p, const std::string& reason);
  void merge(const BadPrimes& other);
  std::map<std::uint64_t, std::vector<std::string>> snapshot() const;
  std::set<std::uint64_t> primes() const;

 private:
  mutable std::mutex mu_;
  std::map<std::uint64_t, std::vector<std::string>> reasons_;
};

struct Variable {
  std::string name;
  Sort sort;
};

struct ParseOptions {
  /// Sort given to identifiers that are neither declared nor determined by context.
  Sort default_sort = Sort::VF;
  /// Variables known before the formula's own declarations (cell parameters).
  std::vector<Variable> predeclared;
};

class Formula {
 public:
  /// The formula `true`.
  Formula();
  Formula(NodePtr root, std::vector<Variable> free_vars);

  const NodePtr& root() const { return root_; }
  /// Declared variables in order, then inferred free variables in order of appearance.
  const std::vector<Variable>& free_vars() const { return free_; }
  std::optional<Sort> sort_of(const std::string& name) const;
  /// Free variables plus every bound variable name.
  std::set<std::string> all_names() const;

  BadPrimes& bad_prime_log() const { return *bad_; }

 private:
  NodePtr root_;
  std::vector<Variable> free_;
  std::shared_ptr<BadPrimes> bad_;
};

/// Throws SyntaxError (with line/column) or SortError.
Formula parse(std::string_view src, const ParseOptions& opts = {});

/// Text that parses back to an equal AST (declarations included).
std::string pretty_print(const Formula& f);
std::string print_term(const TermPtr& t, const std::set<std::string>& var_names);
std::string print_node(const NodePtr& n, const std::set<std::string>& var_names);

/// Structural equality, ignoring spans.
bool equal(const TermPtr& a, const TermPtr& b);
bool equal(const NodePtr& a, const NodePtr& b);
bool equal(const Formula& a, const Formula& b);

/// Primes dividing numerator or denominator of a coefficient of an expanded
/// VF or RF polynomial, merged with whatever downstream code logged.
std::map<std::uint64_t, std::vector<std::string>> bad_primes(const Formula& f);

// ---------------------------------------------------------------------------
// interpretation

enum class Truth3 { False, True, Undecided };
std::string truth_name(Truth3 t);
Truth3 t_not(Truth3 a);
Truth3 t_and(Truth3 a, Truth3 b);
Truth3 t_or(Truth3 a, Truth3 b);

/// Sentinel for the ZZ value +oo.
inline constexpr std::int64_t kZInf = std::int64_t{1} << 60;

using Value = std::variant<lf::LFElem, std::uint32_t, std::int64_t>;  // VF, RF residue, ZZ (kZInf = oo)
using Assignment = std::map<std::string, Value>;

struct InterpretOptions {
  /// Enables VF quantifiers, searched over residue boxes of O at the field precision.
  bool oracle_mode = false;
};

/// Compiles the formula once for a field; eval() is then pure and thread-safe.
class Interpreter {
 public:
  Interpreter(const Formula& f, const lf::LocalFieldSpec& field, InterpretOptions opts = {});
  ~Interpreter();
  Interpreter(Interpreter&&) noexcept;
  Truth3 eval(const Assignment& a) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// UnboundVariable when a free variable has no value; UnsupportedFormula for
/// VF quantifiers outside oracle mode.
Truth3 interpret(const Formula& f, const lf::LocalFieldSpec& field, const Assignment& a, InterpretOptions opts = {});

struct CountOptions {
  /// Values for RF parameters that are not counted.
  std::map<std::string, std::uint32_t> fixed;
  /// Variables to count over; empty means every free RF variable not fixed.
  std::vector<std::string> counted;
  /// Limit on q^n * q^depth * atoms; TooLarge beyond it.
  double budget = 1e8;
};

/// Number of points of F_q^n satisfying a residue-field formula.
std::uint64_t count_rf_points(const Formula& f, std::uint32_t q, const CountOptions& opts = {});

// ---------------------------------------------------------------------------
// single terms

/// A single VF term, e.g. an integrand "t^3 - x". Undeclared names are VF.
TermPtr parse_vf_term(std::string_view src, const ParseOptions& opts = {});
/// Names of the variables a term mentions, in order of first appearance.
std::vector<std::string> term_variables(const TermPtr& t);

/// Evaluates a VF polynomial term with truncated arithmetic.
class TermEvaluator {
 public:
  TermEvaluator(const TermPtr& vf_term, const lf::LocalFieldSpec& field);
  ~TermEvaluator();
  TermEvaluator(TermEvaluator&&) noexcept;
  /// Variables missing from `a` raise UnboundVariable.
  lf::LFElem eval(const Assignment& a) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dpcalc::fm
