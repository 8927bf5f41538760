#pragma once

// Symbolic results against the box oracle, prime by prime.

#include <optional>
#include <string>
#include <vector>

#include "dpcalc/motivic.hpp"
#include "dpcalc/oracle.hpp"

namespace dpcalc::cmp {

struct LinearProduct {
  std::vector<Rational> centers;
  std::vector<unsigned> multiplicities;
  unsigned exponent = 1;
  /// A value asserted by the input instead of the computed one.
  std::optional<SymA> claim;
};

/// "0:3" or "0:1,1:1,3:1"; a bare center has multiplicity 1.
LinearProduct parse_linear_product(const std::string& spec);
/// {"centers": [...], "multiplicities": [...], "exponent": e, "claim": "..."}
LinearProduct read_linear_product(const std::string& json_text);
/// The integrand ∏ (t - c_j)^{m_j} as a VF term in t.
fm::TermPtr linear_product_term(const LinearProduct& lp);

oracle::VolumeInterval linear_product_oracle(const LinearProduct& lp, const lf::LocalFieldSpec& field,
                                             const oracle::OracleOptions& opts = {});
oracle::VolumeInterval case_oracle(const mot::CellFile& file, const mot::CellCase& c, const pres::Assignment& zz,
                                   const lf::LocalFieldSpec& field, const oracle::OracleOptions& opts = {});

/// Specialization of a cell-file case at q with the case's parameter bindings.
Rational case_value(const mot::CellFile& file, const mot::CellCase& c, const mot::IntegrationResult& r,
                    const pres::Assignment& zz, std::uint32_t q);

struct Row {
  std::string label;
  std::uint32_t prime = 0;
  int precision = 0;
  bool skipped = false;  // bad prime
  Rational symbolic;
  std::optional<oracle::VolumeInterval> qp, fpt;
  bool contained = false;
};

struct CompareOptions {
  std::vector<std::uint32_t> primes;
  int precision = 6;
  bool both_characteristics = false;
  oracle::OracleOptions oracle;
};

std::vector<Row> compare_linear_product(const LinearProduct& lp, const CompareOptions& opts);
/// Every case of the file at each of its check assignments.
std::vector<Row> compare_cell_file(const mot::CellFile& file, const CompareOptions& opts);

}  // namespace dpcalc::cmp
