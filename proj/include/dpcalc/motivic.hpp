#pragma once

// Cells, constructible motivic functions and integration in one valued-field
// variable.
//
// A constructible function is a finite sum of terms [Y] ⊗ a where Y is a
// residue-field formula (its counted variables are the free RF variables that
// are not parameters) and a is an L-exponential value in the remaining
// integer parameters, optionally restricted by a guard on those parameters.
// Specializing at q replaces [Y] by its number of F_q-points and L by q.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpcalc/formula.hpp"
#include "dpcalc/presburger.hpp"
#include "dpcalc/symring.hpp"

namespace dpcalc::mot {

struct Guard {
  /// Conditions on the integer parameters; the value is 0 outside.
  pres::PresDomain domain;
  bool empty() const { return domain.vars.empty(); }
  bool holds(const pres::Assignment& zz) const;
  std::string str() const;
};

struct CFTerm {
  fm::Formula rf_class;  // over counted RF variables and RF parameters
  Guard guard;
  pres::PresValue coeff;
};

class ConstructibleFn {
 public:
  ConstructibleFn() = default;
  explicit ConstructibleFn(std::vector<fm::Variable> rf_params) : rf_params_(std::move(rf_params)) {}
  static ConstructibleFn constant(const pres::PresValue& v, std::vector<fm::Variable> rf_params = {});

  /// Adds a term; terms with the same class text and guard are merged, zeros dropped.
  void add(const fm::Formula& rf_class, const Guard& guard, const pres::PresValue& coeff);
  ConstructibleFn& operator+=(const ConstructibleFn& o);
  friend ConstructibleFn operator+(ConstructibleFn a, const ConstructibleFn& b) { return a += b; }
  /// Normal-form equality: same class texts, same guards, equal coefficients.
  friend bool operator==(const ConstructibleFn& a, const ConstructibleFn& b);

  const std::vector<fm::Variable>& rf_params() const { return rf_params_; }
  std::vector<CFTerm> terms() const;
  bool is_zero() const { return terms_.empty(); }
  /// The SymA value when there is a single class-free, guard-free, closed term (or none).
  std::optional<SymA> as_symbolic() const;
  /// Assigns integer parameters, keeping the others symbolic; guards that become
  /// decidable are dropped or zero the term.
  ConstructibleFn partial_eval(const pres::Assignment& zz) const;

  std::string str() const;

 private:
  struct Key {
    std::string cls, guard;
    auto operator<=>(const Key&) const = default;
  };
  struct Entry {
    fm::NodePtr root;
    std::vector<fm::Variable> vars;
    Guard guard;
    pres::PresValue coeff;
  };
  std::vector<fm::Variable> rf_params_;
  std::map<Key, Entry> terms_;
};

/// Values of the parameters of a constructible function at one field.
struct ParamValues {
  std::map<std::string, std::uint32_t> rf;  // residues in F_q
  pres::Assignment zz;
};

/// Σ count(class at q) · ν_q(coeff). BadPrime when q is in `bad`,
/// UnboundParameter when a slot has no value.
Rational specialize(const ConstructibleFn& f, std::uint32_t q, const ParamValues& params,
                    const std::set<std::uint64_t>& bad = {});

/// Count-based realization of f on the primes q ≡ r (mod m): the class counts
/// are fitted by polynomials in q and the result is returned as an element of A.
/// An approximation of class equality by point counts, checked on extra primes.
struct CongruenceCase {
  std::uint32_t modulus = 1;
  std::uint32_t residue = 0;
  SymA value;
};
/// Smallest modulus up to `max_modulus` for which every residue class fits;
/// nullopt otherwise. Integer parameters must already be assigned.
std::optional<std::vector<CongruenceCase>> realize_by_congruence(const ConstructibleFn& f,
                                                                 const std::map<std::string, Rational>& rf_params,
                                                                 const std::set<std::uint64_t>& bad,
                                                                 std::uint32_t max_modulus = 12);

// ---------------------------------------------------------------------------
// cells

enum class CellKind { ZeroCell, OneCell };

/// Center of a cell: a VF term in the parameters, or a root of a polynomial in
/// the integration variable selected by its angular component ("root(t^3 - x; eta2)").
struct Center {
  std::string text;
  fm::TermPtr term;            // plain term centers
  fm::TermPtr root_poly;       // root centers
  std::string root_selector;   // RF expression naming ac of the root
  std::optional<Rational> constant() const;
};

Center parse_center(const std::string& text, const std::string& variable);

struct Cell {
  std::string id;
  CellKind kind = CellKind::OneCell;
  /// Conjunction of pure RF conditions and Presburger conditions over the
  /// parameters plus the cell's extra RF and ZZ variables.
  fm::Formula basis;
  Center center;
  std::optional<pres::AffineForm> alpha;  // OneCell
  fm::TermPtr xi;                         // OneCell, RF term
  pres::PresValue psi;                    // coefficient on the basis
  std::string presentation;               // documentation only
};

struct CellOptions {
  std::vector<fm::Variable> parameters;  // RF and ZZ parameter slots
  std::string variable = "t";            // integration variable (for root centers)
  /// Relative dimension 0: only 0-cells, integrated without the ball factor.
  bool zero_dimensional = false;
};

struct Contribution {
  std::string cell;
  ConstructibleFn value;
};

struct IntegrationResult {
  ConstructibleFn value;
  std::map<std::uint64_t, std::vector<std::string>> bad_primes;
  std::vector<Contribution> derivation;
  std::set<std::uint64_t> bad_prime_set() const;
};

/// Σ over 1-cells of μ(L^{-α-1} ψ ⊗ [basis]). With 1-cells present, 0-cells
/// have measure zero and contribute nothing (they are still validated). In
/// relative dimension 0 a 0-cell contributes ψ ⊗ [basis] (ordjac of t ↦ t - c
/// is 0). UnsupportedZeroCell for non-affine 0-cell centers; OverlapDetected
/// when cells sharing a center have signatures (α, ξ) that cannot be separated.
IntegrationResult integrate_cells(const std::vector<Cell>& cells, const CellOptions& opts);

/// ∫_{Z_p} ∏_j |t - c_j|^{e m_j} |dt| through the residue-class cell decomposition.
IntegrationResult integrate_linear_product(const std::vector<Rational>& centers,
                                           const std::vector<unsigned>& multiplicities, unsigned e = 1);

/// Presburger conditions on integer parameters as an iterated domain
/// (UnsupportedDomain for shapes outside it).
pres::PresDomain parameter_domain(const fm::Formula& conditions, const std::vector<fm::Variable>& params);

/// Class of an RF formula in A when it is an affine space minus finitely many
/// rational points (and similar products); nullopt otherwise.
std::optional<SymA> symbolic_class(const fm::Formula& rf_class, const std::vector<fm::Variable>& params,
                                   fm::BadPrimes* log = nullptr);

// ---------------------------------------------------------------------------
// cell files

struct Witness {
  bool zero = false;
  pres::AffineForm ord;  // x = ϖ^ord * unit
  Rational unit = 1;
};

struct CellCase {
  std::string name;
  std::string domain;  // formula text over the variable and VF parameters
  std::map<std::string, Witness> vf;
  std::map<std::string, Rational> rf;
  pres::PresDomain zz_domain;  // allowed integer parameters
  std::vector<pres::Assignment> checks;
  pres::AffineForm precision_offset;
  std::vector<std::string> cells;  // ids
};

struct CellFile {
  std::string variable = "t";
  std::string integrand;  // VF term; empty for the constant 1
  unsigned exponent = 1;
  std::vector<fm::Variable> parameters;
  std::vector<Cell> cells;
  std::vector<CellCase> cases;

  const CellCase& find_case(const std::string& name) const;
  std::vector<Cell> cells_of(const CellCase& c) const;
  CellOptions options() const;
};

/// CellFormatError on malformed input; SyntaxError/SortError from formula text.
CellFile read_cell_file(const std::string& json_text);
std::string write_cell_file(const CellFile& f);

lf::LFElem witness_value(const Witness& w, const pres::Assignment& zz, const lf::LocalFieldSpec& field);

// ---------------------------------------------------------------------------
// the SL2 volume

struct Appendix2Steps {
  SymA cone;            // [t^2 - s^2 = 0]
  SymA split;           // [∃β≠0 t^2 - s^2 = β^2]
  SymA nonsplit;        // [∄β t^2 - s^2 = β^2] = L^2 - split - cone
  SymA m1;              // nonsplit · (L - 1)
  SymA unit_b_total;    // μ(Φ ∧ ord b = 0) = ½ L M1
  SymA unit_b_per_eta;  // 2/(L - 1) · unit_b_total
  SymA nonunit_b;       // L (L - 1)
  SymA total;
};
Appendix2Steps appendix2_steps();
SymA appendix2_symbolic();

/// Formula texts: φ_η over (a, b, c, d) with RF parameter eta, and Φ over
/// (a, b, c, d, eta), both written in residues of a, b, c, d (level 0).
extern const char* const kAppendix2PhiEta;
extern const char* const kAppendix2PhiSummed;
extern const char* const kAppendix2PhiEtaSwapped;

enum class EtaMode { PerEta, SummedOverNonsquares };

/// Count of points over F_q (per η: of φ_η; summed: of Φ over all non-square η).
std::uint64_t appendix2_count(EtaMode mode, std::uint32_t q, std::uint32_t eta = 0, bool swapped = false);
/// count / q^3. InvalidPrime for q < 5 or even.
Rational appendix2_volume(EtaMode mode, std::uint32_t q, std::uint32_t eta = 0);
std::vector<std::uint32_t> nonsquares(std::uint32_t q);

}  // namespace dpcalc::mot
