#pragma once

// Numeric ground truth over O^m (O = Z_p or F_p[[t]]): volumes and integrals
// bracketed by exact rational intervals from residue boxes mod ϖ^N.
//
// Boxes are refined from level 0 down to level N = field.precision, and a box
// is only split while the formula (or the integrand's order) is undecided on
// it. A box decided at a coarse level is decided the same way on each of its
// sub-boxes, so the interval is the one the full level-N enumeration gives,
// or tighter.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpcalc/formula.hpp"
#include "dpcalc/localfield.hpp"
#include "dpcalc/rational.hpp"

namespace dpcalc::oracle {

struct VolumeInterval {
  Rational lower;
  Rational upper;
  int precision = 0;
  Rational undecided_mass;
  std::uint64_t boxes_total = 0;      // boxes evaluated
  std::uint64_t boxes_true = 0;       // decided true (any level)
  std::uint64_t boxes_undecided = 0;  // still undecided at level N

  bool contains(const Rational& v) const { return lower <= v && v <= upper; }
  Rational width() const { return upper - lower; }
  /// {lower, upper, precision, boxes_total, boxes_true, boxes_undecided}
  std::string to_json() const;
};

/// |f|^e, or the constant 1 when f is null.
struct Integrand {
  fm::TermPtr f;
  unsigned e = 1;
};

/// DPCALC_BOX_BUDGET if set, else 10^8.
std::uint64_t default_box_budget();

struct OracleOptions {
  std::uint64_t box_budget = default_box_budget();
  /// Values of parameters (VF, RF or ZZ) that are not integrated over.
  fm::Assignment fixed;
  /// Worker threads; 0 means one per hardware thread.
  unsigned threads = 0;
};

/// Haar volume of {x in O^m : phi(x)}, m = free VF variables not fixed.
/// BudgetExceeded when more than box_budget boxes would be evaluated.
VolumeInterval volume(const fm::Formula& phi, const lf::LocalFieldSpec& field, const OracleOptions& opts = {});

/// ∫ over {phi} of |f|^e.
VolumeInterval integrate(const Integrand& g, const fm::Formula& phi, const lf::LocalFieldSpec& field,
                         const OracleOptions& opts = {});

/// #{x in (O/ϖ^N)^m : every equation of the system vanishes mod ϖ^N} / q^{N d}.
/// The system is one VF equation or a conjunction of them.
Rational serre_oesterle_count(const fm::Formula& system, lf::FieldKind kind, std::uint32_t p, int N, int d,
                              const OracleOptions& opts = {});

/// (volume(S), volume(aS)) where aS scales the variable `var` (default: the
/// first free VF variable) by a. The second should be |a| times the first.
std::pair<VolumeInterval, VolumeInterval> jacobian_check(const Rational& a, const fm::Formula& phi,
                                                         const lf::LocalFieldSpec& field,
                                                         const OracleOptions& opts = {}, std::string var = "");

/// True when some value v in the first interval has |a| v in the second.
bool scaling_consistent(const std::pair<VolumeInterval, VolumeInterval>& r, const Rational& a, std::uint32_t p);

/// phi with the variable replaced by var/a.
fm::Formula scale_variable(const fm::Formula& phi, const std::string& var, const Rational& a);

}  // namespace dpcalc::oracle
