#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dpcalc/compare.hpp"

using namespace dpcalc;
using namespace dpcalc::mot;
using lf::LocalFieldSpec;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream in(std::string(DPCALC_CORPUS_DIR) + "/" + name);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SymA L() { return SymA::L(); }
SymA Lp(long k) { return SymA::L_pow(k); }

// The generic piece plus one ball per center, written out by hand.
SymA linear_product_expected(std::size_t n, const std::vector<long>& em) {
  SymA v = a_div_by_unit(L() - SymA(static_cast<long>(n)), L());
  for (long k : em) v += (SymA(1) - Lp(-1)) * Lp(-(k + 1)) * SymA::inv_one_minus_L_pow(static_cast<unsigned>(k + 1));
  return v;
}

Rational rp(long p, long e) { return rpow(Rational(p), e); }

// Integral of |t^3 - x| over ord(t) = k for x = p^{3k}, by direct geometric sums.
Rational cube_annulus(long p, long k) {
  const long roots = p % 3 == 1 ? 3 : 1;
  // near a root: Σ_{m>k} p^{-2k} p^{-m} (p^{-m} - p^{-m-1})
  const Rational near = (1 - rp(p, -1)) * rp(p, -4 * k - 2) / (1 - rp(p, -2));
  // the rest of the annulus: |t^3 - x| = p^{-3k} on measure p^{-k} (p - 1 - roots) / p
  const Rational rest = rp(p, -3 * k) * rp(p, -k) * Rational(p - 1 - roots, p);
  return roots * near + rest;
}

// The printed case split for the same integral.
Rational cube_display(long p, long k) {
  const Rational head = (1 - rp(p, -1)) * rp(p, -4 * k - 2) / (1 - rp(p, -2));
  if (p % 3 == 1) return 3 * head + rp(p, -6 * k) - 4 * rp(p, -(6 * k + 1));
  return head + rp(p, -6 * k) - 2 * rp(p, -(6 * k + 1));
}

}  // namespace

TEST_CASE("integrate_linear_product") {
  auto r = integrate_linear_product({0}, {3}, 1);
  REQUIRE(r.value.as_symbolic());
  CHECK(*r.value.as_symbolic() == SymA::parse("(1 - L^-1)/(1 - L^-4)"));
  CHECK(r.value.as_symbolic()->str() == "(1 - L^-1)/(1 - L^-4)");
  CHECK(r.bad_primes.empty());
  CHECK(r.derivation.size() == 2);

  auto line = integrate_linear_product({0}, {1}, 1);
  CHECK(*line.value.as_symbolic() == SymA::parse("(1 - L^-1)/(1 - L^-2)"));

  auto three = integrate_linear_product({0, 1, 3}, {1, 1, 1}, 1);
  CHECK(*three.value.as_symbolic() == linear_product_expected(3, {1, 1, 1}));
  CHECK(three.bad_prime_set() == std::set<std::uint64_t>{2, 3});

  const std::vector<Rational> mc{make_rational(1, 2), 2, -1};
  const std::vector<unsigned> mm{2, 1, 3};
  auto mixed = integrate_linear_product(mc, mm, 2);
  CHECK(*mixed.value.as_symbolic() == linear_product_expected(3, {4, 2, 6}));
  CHECK(mixed.bad_prime_set() == std::set<std::uint64_t>{2, 3});

  const std::vector<Rational> twice{1, 1}, halves{make_rational(2, 4), make_rational(1, 2)};
  const std::vector<unsigned> m1{1, 2}, m2{1, 1};
  CHECK_THROWS_AS(integrate_linear_product(twice, m1, 1), DuplicateCenter);
  CHECK_THROWS_AS(integrate_linear_product(halves, m2, 1), DuplicateCenter);
}

TEST_CASE("linear products against the oracle") {
  struct Case {
    std::string spec;
    std::vector<std::uint32_t> primes;
  };
  for (const Case& c : {Case{"0:1", {5, 7}}, Case{"0:3", {5, 7}}, Case{"0:1,1:1,3:1", {5, 7, 11, 13}}}) {
    INFO(c.spec);
    const auto lp = cmp::parse_linear_product(c.spec);
    const auto r = integrate_linear_product(lp.centers, lp.multiplicities, lp.exponent);
    for (auto p : c.primes) {
      const Rational v = nu_q(*r.value.as_symbolic(), Rational(p));
      for (auto f : {LocalFieldSpec::qp(p, 6), LocalFieldSpec::fpt(p, 6)}) {
        const auto iv = cmp::linear_product_oracle(lp, f);
        CHECK(iv.contains(v));
        CHECK(iv.width() <= rp(p, -4));
      }
    }
  }
}

TEST_CASE("two derivations of the x = 0 integral agree") {
  // Σ_{i>=0} L^{-3i} (L - 1) L^{-(i+1)}, summed by the Presburger engine
  pres::PresDomain d;
  d.vars.push_back({"i", pres::AffineForm(0), std::nullopt});
  const pres::PresValue s =
      pres::sum(d, pres::PresValue((L() - SymA(1)) * Lp(-1), pres::AffineForm::var("i", -4)));
  CHECK(s.closed() == *integrate_linear_product({0}, {3}, 1).value.as_symbolic());

  // the same integral from the x = 0 case of the cube cell data
  const CellFile f = read_cell_file(slurp("cube.cells.json"));
  const auto& zero = f.find_case("zero");
  const auto r = integrate_cells(f.cells_of(zero), f.options());
  REQUIRE(r.value.as_symbolic());
  CHECK(*r.value.as_symbolic() == s.closed());
}

TEST_CASE("cube cell data") {
  const CellFile f = read_cell_file(slurp("cube.cells.json"));
  const auto& cube = f.find_case("cube");
  const auto r = integrate_cells(f.cells_of(cube), f.options());
  CHECK(r.bad_prime_set() == std::set<std::uint64_t>{3});
  REQUIRE(r.derivation.size() == 2);

  // the cell around a cube root: [eta2^3 = ac(x), eta3 != 0] ⊗ L^{-2k-1} L^{-2(k+1)} (1 - L^-2)^-1
  const auto& hc = r.derivation[0];
  CHECK(hc.cell == "h_c");
  const auto terms = hc.value.terms();
  REQUIRE(terms.size() == 1);
  for (long k = 0; k <= 3; ++k) {
    const SymA expect = Lp(-2 * k - 1) * Lp(-2 * (k + 1)) * SymA::inv_one_minus_L_pow(2);
    CHECK(terms[0].coeff.evaluate({{"k", k}}) == expect);
  }
  CHECK(fm::count_rf_points(terms[0].rf_class, 7, {{{"acx", 1}}, {}, 1e8}) == 18);
  CHECK(fm::count_rf_points(terms[0].rf_class, 5, {{{"acx", 1}}, {}, 1e8}) == 4);

  for (long p : {5, 7, 11, 13, 17, 19}) {
    for (long k : {0, 1, 2}) {
      INFO("p = " << p << ", k = " << k);
      const Rational v = cmp::case_value(f, cube, r, {{"k", k}}, static_cast<std::uint32_t>(p));
      CHECK(v == cube_annulus(p, k));
      if (k == 0) CHECK(v == cube_display(p, 0));
    }
  }
  // the printed display disagrees with the direct sum once k >= 1
  CHECK(cube_annulus(7, 1) != cube_display(7, 1));
  CHECK_THROWS_AS(cmp::case_value(f, cube, r, {{"k", 0}}, 3), BadPrime);

  for (long p : {5, 7}) {
    for (long k : {0, 1}) {
      INFO("p = " << p << ", k = " << k);
      const Rational v = cube_annulus(p, k);
      for (auto fs : {LocalFieldSpec::qp(static_cast<std::uint32_t>(p), static_cast<int>(6 + 3 * k)),
                      LocalFieldSpec::fpt(static_cast<std::uint32_t>(p), static_cast<int>(6 + 3 * k))}) {
        const auto iv = cmp::case_oracle(f, cube, {{"k", k}}, fs);
        CHECK(iv.contains(v));
        if (k == 1) CHECK_FALSE(iv.contains(cube_display(p, 1)));
      }
    }
  }
}

TEST_CASE("realization by congruence classes") {
  const CellFile f = read_cell_file(slurp("cube.cells.json"));
  const auto& cube = f.find_case("cube");
  const auto r = integrate_cells(f.cells_of(cube), f.options());
  const auto at0 = r.value.partial_eval({{"k", 0}});
  const auto cases = realize_by_congruence(at0, {{"acx", 1}}, r.bad_prime_set());
  REQUIRE(cases);
  REQUIRE(cases->size() == 2);
  CHECK((*cases)[0].modulus == 3);
  CHECK((*cases)[0].residue == 1);
  CHECK((*cases)[1].residue == 2);
  const SymA head = (SymA(1) - Lp(-1)) * Lp(-2) * SymA::inv_one_minus_L_pow(2);
  CHECK((*cases)[0].value == SymA(3) * head + SymA(1) - SymA(4) * Lp(-1));
  CHECK((*cases)[1].value == head + SymA(1) - SymA(2) * Lp(-1));
}

TEST_CASE("whole-line cases against the oracle") {
  const CellFile f = read_cell_file(slurp("cube.cells.json"));
  cmp::CompareOptions o;
  o.primes = {5, 7};
  o.precision = 6;
  o.both_characteristics = true;
  for (const auto& row : cmp::compare_cell_file(f, o)) {
    INFO(row.label << " p=" << row.prime);
    CHECK_FALSE(row.skipped);
    CHECK(row.contained);
  }
}

TEST_CASE("integrate_cells edge cases") {
  CHECK(integrate_cells({}, {}).value.is_zero());

  fm::ParseOptions po;
  po.default_sort = fm::Sort::RF;
  Cell line;
  line.id = "punctured";
  line.basis = fm::parse("rf e; zz r; e != 0 && r >= 0", po);
  line.center = parse_center("0", "t");
  line.alpha = pres::AffineForm::var("r");
  fm::ParseOptions xo = po;
  xo.predeclared = line.basis.free_vars();
  line.xi = fm::parse("e != 0", xo).root()->lhs;
  line.psi = pres::PresValue(SymA(1));
  auto one = integrate_cells({line}, {});
  CHECK(*one.value.as_symbolic() == SymA(1));

  // additivity over a split of the same cells
  Cell a = line, b = line;
  a.id = "low";
  a.basis = fm::parse("rf e; zz r; e != 0 && r >= 0 && r <= 4", po);
  b.id = "high";
  b.basis = fm::parse("rf e; zz r; e != 0 && r >= 5", po);
  const auto ab = integrate_cells({a, b}, {});
  CHECK(ab.value == integrate_cells({a}, {}).value + integrate_cells({b}, {}).value);
  CHECK(*ab.value.as_symbolic() == SymA(1));

  // overlapping signatures around one center
  Cell c = line;
  c.id = "again";
  CHECK_THROWS_AS(integrate_cells({line, c}, {}), OverlapDetected);
  // same center, same α, separated by ac
  Cell u = line, w = line;
  u.id = "plus";
  u.basis = fm::parse("rf e; zz r; e == 1 && r >= 0", po);
  w.id = "minus";
  w.basis = fm::parse("rf e; zz r; e == 2 && r >= 0", po);
  CHECK_NOTHROW(integrate_cells({u, w}, {}));

  Cell z;
  z.id = "curve";
  z.kind = CellKind::ZeroCell;
  z.center = parse_center("x^2", "t");
  z.psi = pres::PresValue(SymA(1));
  CHECK_THROWS_AS(integrate_cells({z}, {}), UnsupportedZeroCell);
  z.center = parse_center("2*x + 1", "t");
  CellOptions zo;
  zo.zero_dimensional = true;
  CHECK(*integrate_cells({z}, zo).value.as_symbolic() == SymA(1));
  // measure zero next to a 1-cell
  CHECK(*integrate_cells({line, z}, {}).value.as_symbolic() == SymA(1));

  Cell bad = line;
  bad.id = "divergent";
  bad.psi = pres::PresValue(SymA(1), pres::AffineForm::var("r", 2));
  CHECK_THROWS_AS(integrate_cells({bad}, {}), NotSummable);
}

TEST_CASE("specialize") {
  CHECK(specialize(ConstructibleFn::constant(pres::PresValue(SymA(1))), 11, {}) == 1);
  ConstructibleFn f;
  fm::ParseOptions po;
  po.default_sort = fm::Sort::RF;
  f.add(fm::parse("rf u; u != 0", po), Guard{}, pres::PresValue(Lp(-1)));
  CHECK(specialize(f, 7, {}) == Rational(6, 7));
  CHECK_THROWS_AS(specialize(f, 7, {}, {7}), BadPrime);
  CHECK_THROWS_AS(specialize(f, 8, {}), InvalidPrime);

  ConstructibleFn g({{"s", fm::Sort::RF}});
  po.predeclared = {{"s", fm::Sort::RF}};
  g.add(fm::parse("rf u; u^2 == s", po), Guard{}, pres::PresValue(SymA(1), pres::AffineForm::var("n", -1)));
  CHECK_THROWS_AS(specialize(g, 7, {}), UnboundParameter);
  CHECK_THROWS_AS(specialize(g, 7, {{{"s", 2}}, {}}), UnboundParameter);
  CHECK(specialize(g, 7, {{{"s", 2}}, {{"n", 1}}}) == Rational(2, 7));
  CHECK(specialize(g, 7, {{{"s", 3}}, {{"n", 1}}}) == 0);
}

TEST_CASE("cell file round trip") {
  const CellFile f = read_cell_file(slurp("cube.cells.json"));
  const CellFile g = read_cell_file(write_cell_file(f));
  CHECK(write_cell_file(g) == write_cell_file(f));
  for (const auto& c : f.cases) {
    const auto a = integrate_cells(f.cells_of(c), f.options());
    const auto b = integrate_cells(g.cells_of(g.find_case(c.name)), g.options());
    CHECK(a.value == b.value);
  }
  CHECK_THROWS_AS(read_cell_file("{"), CellFormatError);
  CHECK_THROWS_AS(read_cell_file(R"({"cells": [{"id": "a", "basis": "true"}]})"), CellFormatError);
  CHECK_THROWS_AS(read_cell_file(R"({"cells": [], "cases": [{"name": "c", "cells": ["nope"]}]})"), CellFormatError);
}

TEST_CASE("SL2 volume") {
  const auto s = appendix2_steps();
  const SymA half(Rational(1, 2));
  CHECK(s.cone == SymA(2) * L() - SymA(1));
  CHECK(s.nonsplit == half * L() * L() - L() + half);
  CHECK(s.m1 == half * (L() - SymA(1)) * (L() - SymA(1)) * (L() - SymA(1)));
  CHECK(s.unit_b_per_eta == half * L() * (L() - SymA(1)) * (L() - SymA(1)));
  CHECK(appendix2_symbolic() == half * (L() * L() * L() - L()));

  for (std::uint32_t q : {5u, 7u, 11u, 13u}) {
    INFO("q = " << q);
    const std::uint64_t expect = static_cast<std::uint64_t>(q) * (q - 1) * (q + 1) / 2;
    CHECK(nu_q(appendix2_symbolic(), Rational(q)) == Rational(static_cast<long>(expect)));
    std::set<std::uint64_t> counts, swapped;
    for (auto eta : nonsquares(q)) {
      counts.insert(appendix2_count(EtaMode::PerEta, q, eta));
      swapped.insert(appendix2_count(EtaMode::PerEta, q, eta, true));
    }
    CHECK(counts == std::set<std::uint64_t>{expect});
    CHECK(swapped.size() == 1);
    CHECK(appendix2_count(EtaMode::SummedOverNonsquares, q) == *swapped.begin() * (q - 1) / 2);
    CHECK(appendix2_volume(EtaMode::PerEta, q) == Rational(static_cast<long>(expect)) / Rational(ipow(q, 3)));

    // the conic step: t^2 - s^2 a nonzero square
    fm::ParseOptions po;
    po.default_sort = fm::Sort::RF;
    const auto split = fm::parse("rf t, s; exists b:rf. b != 0 && t^2 - s^2 == b^2", po);
    CHECK(fm::count_rf_points(split, q) == static_cast<std::uint64_t>((q - 1) * (q - 1) / 2));
    CHECK(Rational(static_cast<long>((q - 1) * (q - 1) / 2)) == nu_q(s.split, Rational(q)));
  }
  CHECK_THROWS_AS(appendix2_volume(EtaMode::PerEta, 3), InvalidPrime);
  CHECK_THROWS_AS(appendix2_volume(EtaMode::PerEta, 9), InvalidPrime);
  CHECK_THROWS_AS(appendix2_count(EtaMode::PerEta, 7, 2), std::invalid_argument);

  // shipped fixtures match the built-in formulas
  fm::ParseOptions po;
  po.default_sort = fm::Sort::RF;
  CHECK(fm::equal(fm::parse(slurp("appendix2.phi_eta.dp"), po), fm::parse(kAppendix2PhiEta, po)));
  CHECK(fm::equal(fm::parse(slurp("appendix2.phi_summed.dp"), po), fm::parse(kAppendix2PhiSummed, po)));
  CHECK(fm::equal(fm::parse(slurp("appendix2.phi_eta_swapped.dp"), po), fm::parse(kAppendix2PhiEtaSwapped, po)));
}
