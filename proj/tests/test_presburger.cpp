#include <random>

#include "doctest.h"
#include "dpcalc/presburger.hpp"

using namespace dpcalc;
using namespace dpcalc::pres;

namespace {

const SymA L = SymA::L();

VarRange ray_up(const std::string& v, const AffineForm& lo, std::int64_t d = 1, std::int64_t r = 0) {
  return VarRange{v, lo, std::nullopt, d, r};
}
VarRange range(const std::string& v, const AffineForm& lo, const AffineForm& hi, std::int64_t d = 1, std::int64_t r = 0) {
  return VarRange{v, lo, hi, d, r};
}

struct Case {
  PresDomain dom;
  PresTerm term;
};

std::vector<Case> corpus() {
  const SymA one_minus = SymA(1) - SymA::L_pow(-1);
  return {
      {{{ray_up("i", 0)}}, {SymA(1), AffineForm::var("i", -1)}},
      {{{ray_up("i", 0, 3, 1)}}, {SymA(1), AffineForm::var("i", -1)}},
      {{{ray_up("i", 0)}}, {one_minus, AffineForm::var("i", -4)}},
      {{{ray_up("m", 1)}}, {one_minus, AffineForm::var("m", -2)}},  // B1 at k = 0
      {{{ray_up("m", 2)}}, {one_minus * SymA::L_pow(-2), AffineForm::var("m", -2)}},  // B1 at k = 1
      {{{range("i", -3, 5)}}, {SymA(3), AffineForm::var("i", 2)}},
      {{{range("j", 0, 4), ray_up("i", AffineForm::var("j"))}}, {SymA(1), AffineForm::var("i", -1) - AffineForm::var("j", 2)}},
      {{{ray_up("a", 0), ray_up("b", 0, 2, 1)}}, {SymA(2), AffineForm::var("a", -1) - AffineForm::var("b", 3) + AffineForm(1)}},
      {{{VarRange{"i", std::nullopt, AffineForm(-2), 1, 0}}}, {SymA(1), AffineForm::var("i", 1)}},
  };
}

}  // namespace

TEST_CASE("affine forms") {
  auto f = AffineForm::parse("2*k + 1 - g");
  CHECK(f.coeff("k") == 2);
  CHECK(f.coeff("g") == -1);
  CHECK(f.constant() == 1);
  CHECK(f.str() == "-g + 2*k + 1");
  CHECK(AffineForm::parse(f.str()) == f);
  CHECK(AffineForm::parse("-3").str() == "-3");
  CHECK(AffineForm::parse("k - k").str() == "0");
  CHECK(f.eval({{"k", 2}, {"g", 1}}) == 4);
  CHECK_THROWS_AS(f.eval({{"k", 2}}), UnboundParameter);
  CHECK_THROWS(AffineForm::parse("2*"));
  CHECK_THROWS(AffineForm::parse("k k"));
}

TEST_CASE("geometric series") {
  PresDomain d{{ray_up("i", 0)}};
  CHECK(sum(d, PresTerm{SymA(1), AffineForm::var("i", -1)}).closed() == SymA::inv_one_minus_L_pow(1));
  PresDomain prog{{ray_up("i", 0, 3, 1)}};
  CHECK(sum(prog, PresTerm{SymA(1), AffineForm::var("i", -1)}).closed().str() == "L^-1/(1 - L^-3)");
  CHECK_THROWS_AS(sum(d, PresTerm{SymA(1), AffineForm::var("i", 1)}), NotSummable);
  CHECK_THROWS_AS(sum(d, PresTerm{SymA(1), AffineForm()}), NotSummable);
  PresDomain all{{VarRange{"i", std::nullopt, std::nullopt, 1, 0}}};
  CHECK_THROWS_AS(sum(all, PresTerm{SymA(1), AffineForm::var("i", -1)}), NotSummable);
  // finite ranges
  PresDomain box{{range("i", 0, 3)}};
  CHECK(sum(box, PresTerm{SymA(1), AffineForm()}).closed() == SymA(4));
  CHECK(sum(box, PresTerm{SymA(1), AffineForm::var("i")}).closed() == SymA::parse("1 + L + L^2 + L^3"));
  PresDomain empty{{range("i", 3, 0)}};
  CHECK(sum(empty, PresTerm{SymA(1), AffineForm::var("i")}).is_zero());
}

TEST_CASE("the B1 sum at symbolic k") {
  // Σ_{m >= k+1} L^{-m} L^{-2k} (L^{-m} - L^{-(m+1)})
  PresDomain d{{ray_up("m", AffineForm::parse("k + 1"))}};
  PresValue integrand = PresValue(SymA(1), AffineForm::parse("-2*m - 2*k")) - PresValue(SymA(1), AffineForm::parse("-2*m - 2*k - 1"));
  PresValue got = sum(d, integrand);
  // (1 - L^-1) L^{-2k} L^{-2(k+1)} (1 - L^-2)^-1
  PresValue expected = PresValue(SymA::parse("(1 - L^-1)/(1 - L^-2)"), AffineForm::parse("-2*k - 2*k - 2"));
  CHECK(got == expected);
  CHECK(got.str() == "((L^-2 - L^-3)/(1 - L^-2))*L^(-4*k)");
  CHECK(got.parameters() == std::vector<std::string>{"k"});
  CHECK_FALSE(got.is_closed());
  CHECK_THROWS_AS(got.closed(), UnboundParameter);
  for (std::int64_t k : {0, 1, 2}) {
    auto tr = evaluate_truncated(PresDomain{{ray_up("m", AffineForm(k + 1))}},
                                 PresTerm{SymA::parse("1 - L^-1"), AffineForm(-2 * k) + AffineForm::var("m", -2)}, 7, 30);
    Rational exact = got.nu_q({{"k", k}}, 7);
    REQUIRE(tr.tail_bound);
    CHECK(abs(tr.partial - exact) <= *tr.tail_bound);
  }
}

TEST_CASE("piecewise sums") {
  PresTerm t{SymA(1), AffineForm::var("i", -1)};
  auto n = AffineForm::var("n");
  PresValue v = sum_piecewise({{PresDomain{{range("i", 0, n - AffineForm(1))}}, t}, {PresDomain{{ray_up("i", n)}}, t}});
  CHECK(v == PresValue(SymA::inv_one_minus_L_pow(1)));
  for (std::int64_t m : {0, 1, 5}) {
    PresValue w = sum_piecewise({{PresDomain{{range("i", 0, m - 1)}}, t}, {PresDomain{{ray_up("i", m)}}, t}});
    CHECK(w.closed() == SymA::inv_one_minus_L_pow(1));
  }
  CHECK(sum_piecewise({}).is_zero());
  // ∫|t^3| by annuli i = 0, 1..4, >= 5; annulus i carries (1 - L^-1) L^{-4i}.
  PresTerm annulus{SymA::parse("1 - L^-1"), AffineForm::var("i", -4)};
  PresValue three = sum_piecewise({{PresDomain{{range("i", 0, 0)}}, annulus},
                                   {PresDomain{{range("i", 1, 4)}}, annulus},
                                   {PresDomain{{ray_up("i", 5)}}, annulus}});
  CHECK(three.closed().str() == "(1 - L^-1)/(1 - L^-4)");
  CHECK_THROWS_AS(sum_piecewise({{PresDomain{{range("i", 0, 4)}}, t}, {PresDomain{{ray_up("i", 4)}}, t}}), OverlapDetected);
  CHECK_THROWS_AS(sum_piecewise({{PresDomain{{ray_up("i", 0)}}, t}, {PresDomain{{ray_up("i", n)}}, t}}), OverlapDetected);
  // Disjoint by congruence.
  CHECK_NOTHROW(sum_piecewise({{PresDomain{{ray_up("i", 0, 2, 0)}}, t}, {PresDomain{{ray_up("i", 0, 2, 1)}}, t}}));
  CHECK_THROWS_AS(sum_piecewise({{PresDomain{{ray_up("i", 0, 2, 0)}}, t}, {PresDomain{{ray_up("i", 0, 3, 0)}}, t}}), OverlapDetected);
  CHECK_NOTHROW(sum_piecewise({{PresDomain{{range("i", 0, 5, 4, 1)}}, t}, {PresDomain{{range("i", 2, 4, 2, 1)}}, t}}));
}

TEST_CASE("truncated evaluation") {
  PresDomain d{{ray_up("i", 0)}};
  PresTerm t{SymA(1), AffineForm::var("i", -1)};
  auto a = evaluate_truncated(d, t, 2, 20);
  CHECK(a.partial == 2 - rpow(2, -20));
  REQUIRE(a.tail_bound);
  CHECK(*a.tail_bound == rpow(2, -20));
  CHECK(*a.tail_bound <= rpow(2, -19));
  auto b = evaluate_truncated(d, t, 3, 0);
  CHECK(b.partial == 1);
  CHECK(*b.tail_bound <= Rational(1, 2));
}

TEST_CASE("specialization exactness over the corpus") {
  const Rational qs[] = {2, 3, Rational(5, 2), 7};
  for (const auto& c : corpus()) {
    SymA s = sum(c.dom, c.term).closed();
    for (const auto& q : qs) {
      Rational exact = nu_q(s, q);
      Rational prev_tail = -1;
      for (std::int64_t cutoff : {10, 20, 40}) {
        auto tr = evaluate_truncated(c.dom, c.term, q, cutoff);
        REQUIRE(tr.tail_bound);
        CHECK(abs(tr.partial - exact) <= *tr.tail_bound);
        if (prev_tail >= 0) CHECK(*tr.tail_bound <= prev_tail);
        prev_tail = *tr.tail_bound;
      }
    }
  }
}

TEST_CASE("Fubini: both summation orders agree") {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> bound(-3, 3), width(0, 4), coef(1, 3), mod(1, 3);
  for (int it = 0; it < 60; ++it) {
    // box x ray, ray x ray, box x box
    std::int64_t a = -coef(rng), b = -coef(rng);
    std::int64_t l1 = bound(rng), l2 = bound(rng), m1 = mod(rng), m2 = mod(rng);
    VarRange x{"x", l1, std::nullopt, m1, 0}, y{"y", l2, std::nullopt, m2, m2 - 1};
    if (it % 3 == 1) x.upper = AffineForm(l1 + width(rng));
    if (it % 3 == 2) {
      x.upper = AffineForm(l1 + width(rng));
      y.upper = AffineForm(l2 + width(rng));
      a = coef(rng) - 2;
      b = coef(rng) - 2;
    }
    PresTerm t{SymA(coef(rng)), AffineForm::var("x", a) + AffineForm::var("y", b) + AffineForm(bound(rng))};
    SymA xy = sum(PresDomain{{x, y}}, t).closed();
    SymA yx = sum(PresDomain{{y, x}}, t).closed();
    CHECK(xy == yx);
  }
}

TEST_CASE("shift invariance and congruence splitting") {
  PresTerm t{SymA(1), AffineForm::var("i", -2) + AffineForm(1)};
  SymA base = sum(PresDomain{{ray_up("i", 3)}}, t).closed();
  for (std::int64_t c : {-4, -1, 2, 7}) {
    // i -> i + c: domain i >= 3 - c, exponent -2(i + c) + 1
    PresTerm shifted{SymA(1), AffineForm::var("i", -2) + AffineForm(-2 * c + 1)};
    CHECK(sum(PresDomain{{ray_up("i", 3 - c)}}, shifted).closed() == base);
  }
  PresTerm u{SymA::parse("1 - L^-1"), AffineForm::var("i", -3)};
  SymA whole = sum(PresDomain{{ray_up("i", 0)}}, u).closed();
  for (std::int64_t d : {2, 3, 4}) {
    SymA parts;
    for (std::int64_t c = 0; c < d; ++c) parts += sum(PresDomain{{ray_up("i", 0, d, c)}}, u).closed();
    CHECK(parts == whole);
  }
  // Parametric lower bounds with a congruence need the modulus to divide them.
  CHECK_NOTHROW(sum(PresDomain{{ray_up("i", AffineForm::var("k", 3), 3, 1)}}, u));
  CHECK_THROWS_AS(sum(PresDomain{{ray_up("i", AffineForm::var("k", 1), 3, 1)}}, u), UnsupportedDomain);
}
