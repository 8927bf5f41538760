#include <random>

#include "doctest.h"
#include "dpcalc/formula.hpp"

using namespace dpcalc;
using namespace dpcalc::fm;
using lf::LFElem;
using lf::LocalFieldSpec;

namespace {

const std::vector<std::string> kFixed = {
    "vf x; ord(x) == 0 && exists u:rf. u^3 == ac(x)",
    "vf a,b,c,d; a*d - b*c == 1 && exists e:rf. e != 0 && ac(d)^2 - ac(b)^2 * H == e^2",
    "vf a,b,c,d; rf H; a*d - b*c == 1 && exists e:rf. e != 0 && ac(b)^2 - ac(d)^2 * H == e^2",
    "vf x; 3*ord(t) == ord(x) && ord(x) < 3*ord(t) + 1",
    "vf x, y; x^2 + y^2 == 1",
    "vf x; ord(t^3 - x) >= 2 || ord(x) == inf",
    "zz n, k; n == 2*k + 1 mod 3 && !(n <= k)",
    "rf u; exists u2:rf. u2^2 == u && u != 0",
    "vf x; forall y:rf. y == ac(x) || y != ac(x)",
    "vf x; !(x == 0) && !!(x == 1/2)",
    "vf x; x/3 - (-1/2)*x == t^2 - -x",
    "vf x; -(x + 1)*(x - 1) == -(3) && x^2 == (-3)^2",
    "vf x; 3*x == 0",
    "true && (false || x == 0)",
    "u^3 == 1",
    "exists w. w^2 == u && u != 0",
    "vf x; exists y:vf. y^3 == x && ord(y) >= 0",
    "zz g, k; g >= k + 1 && -g + 2*k <= 0 && g - k > 0",
};

// Random formula text over a fixed vocabulary.
struct Gen {
  std::mt19937 rng;
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

  std::string vf_term(int d) {
    if (d == 0 || pick(3) == 0) {
      switch (pick(5)) {
        case 0: return "x";
        case 1: return "y";
        case 2: return "t";
        case 3: return std::to_string(pick(7));
        default: return "(-" + std::to_string(1 + pick(5)) + "/" + std::to_string(1 + pick(3)) + ")";
      }
    }
    switch (pick(6)) {
      case 0: return vf_term(d - 1) + " + " + vf_term(d - 1);
      case 1: return vf_term(d - 1) + " - " + vf_term(d - 1);
      case 2: return "(" + vf_term(d - 1) + ")*" + vf_term(d - 1);
      case 3: return "-" + vf_term(d - 1);
      case 4: return "(" + vf_term(d - 1) + ")^" + std::to_string(1 + pick(3));
      default: return "(" + vf_term(d - 1) + ")/" + std::to_string(1 + pick(4));
    }
  }
  std::string rf_term(int d) {
    if (d == 0 || pick(3) == 0) {
      switch (pick(4)) {
        case 0: return "u";
        case 1: return "ac(" + vf_term(1) + ")";
        default: return std::to_string(pick(5));
      }
    }
    switch (pick(4)) {
      case 0: return rf_term(d - 1) + " + " + rf_term(d - 1);
      case 1: return rf_term(d - 1) + "*" + rf_term(d - 1);
      case 2: return "-" + rf_term(d - 1);
      default: return "(" + rf_term(d - 1) + ")^2";
    }
  }
  std::string zz_term(int d) {
    if (d == 0 || pick(3) == 0) {
      switch (pick(4)) {
        case 0: return "n";
        case 1: return "ord(" + vf_term(1) + ")";
        case 2: return "inf";
        default: return std::to_string(pick(5));
      }
    }
    switch (pick(4)) {
      case 0: return zz_term(d - 1) + " + " + zz_term(d - 1);
      case 1: return zz_term(d - 1) + " - " + zz_term(d - 1);
      case 2: return std::to_string(1 + pick(3)) + "*" + zz_term(d - 1);
      default: return "-" + zz_term(d - 1);
    }
  }
  std::string atom() {
    static const char* zrel[] = {" == ", " <= ", " < ", " >= ", " > ", " != "};
    switch (pick(4)) {
      case 0: return vf_term(2) + " == " + vf_term(2);
      case 1: return rf_term(2) + (pick(2) ? " == " : " != ") + rf_term(2);
      case 2: return zz_term(2) + zrel[pick(6)] + zz_term(2);
      default: return zz_term(1) + " == " + zz_term(1) + " mod " + std::to_string(2 + pick(3));
    }
  }
  std::string formula(int d, int& qc) {
    if (d == 0) return atom();
    switch (pick(6)) {
      case 0: return formula(d - 1, qc) + " && " + formula(d - 1, qc);
      case 1: return "(" + formula(d - 1, qc) + " || " + formula(d - 1, qc) + ")";
      case 2: return "!(" + formula(d - 1, qc) + ")";
      case 3: {
        const std::string v = "w" + std::to_string(qc++);
        return "(exists " + v + ":rf. " + v + " != u && " + formula(d - 1, qc) + ")";
      }
      case 4: {
        const std::string v = "m" + std::to_string(qc++);
        return "(forall " + v + ":zz. " + v + " <= n || " + formula(d - 1, qc) + ")";
      }
      default: return atom();
    }
  }
  std::string full() {
    int qc = 0;
    return "vf x, y; rf u; zz n; " + formula(3, qc);
  }
};

Assignment exact_assignment(const LocalFieldSpec& f, const Rational& x, const Rational& y, std::uint32_t u,
                            std::int64_t n) {
  return {{"x", lf::embed_rational(x, f)}, {"y", lf::embed_rational(y, f)}, {"u", u % f.prime}, {"n", n}};
}

}  // namespace

TEST_CASE("parse examples") {
  Formula f = parse(kFixed[0]);
  REQUIRE(f.free_vars().size() == 1);
  CHECK(f.free_vars()[0].name == "x");
  CHECK(f.free_vars()[0].sort == Sort::VF);

  Formula g = parse(kFixed[1]);
  CHECK(g.sort_of("H") == Sort::RF);
  CHECK(g.sort_of("e") == Sort::RF);
  CHECK(g.free_vars().size() == 5);

  CHECK_THROWS_AS(parse("zz n; n * n == 4"), SortError);
  try {
    parse("zz n; n * n == 4");
  } catch (const SortError& e) {
    CHECK(std::string(e.what()).find("'n'") != std::string::npos);
    CHECK(std::string(e.what()).find("zz") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("vf x; rf u; x == u"), SortError);
  CHECK_THROWS_AS(parse("rf u; u/2 == 1"), SortError);
  CHECK_THROWS_AS(parse("vf x; x <= 1"), SortError);
  CHECK_THROWS_AS(parse("vf x; x / x == 1"), SortError);
  CHECK_THROWS_AS(parse("vf x; exists x:vf. x == 0"), SortError);
  CHECK_THROWS_AS(parse("exists y:rf. y == 0 && exists y:rf. y == 1"), SortError);
  CHECK_NOTHROW(parse("(exists y:rf. y == 0) && exists y:rf. y == 1"));
  CHECK_THROWS_AS(parse("u == 1 && exists u:rf. u == 0"), SortError);
  try {
    parse("vf x;\n  x + == 1");
    FAIL("expected a syntax error");
  } catch (const SyntaxError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 7);
  }
  CHECK_THROWS_AS(parse("vf x; x == 1 &&"), SyntaxError);
  CHECK_THROWS_AS(parse("vf x; x $ 1"), SyntaxError);
  // `t` is the uniformizer unless declared.
  CHECK(parse("vf x; x == t").free_vars().size() == 1);
  Formula tv = parse("vf t; t == unif");
  CHECK(pretty_print(tv) == "vf t; t == unif");
  // comments
  CHECK(equal(parse("# header\nvf x; # trailing\n x == 0"), parse("vf x; x == 0")));
}

TEST_CASE("printing round-trips") {
  std::vector<std::string> corpus = kFixed;
  Gen gen{std::mt19937(17)};
  while (corpus.size() < 220) corpus.push_back(gen.full());
  int checked = 0;
  for (const auto& src : corpus) {
    INFO(src);
    ParseOptions opts;
    if (src.rfind("u^3", 0) == 0 || src.rfind("exists w", 0) == 0) opts.default_sort = Sort::RF;
    Formula a = parse(src, opts);
    const std::string printed = pretty_print(a);
    INFO(printed);
    Formula b = parse(printed);
    CHECK(equal(a, b));
    CHECK(pretty_print(b) == printed);
    ++checked;
  }
  CHECK(checked >= 200);
  // Structural equality is not textual: different groupings give different ASTs.
  CHECK_FALSE(equal(parse("vf x; x + (x + 1) == 0"), parse("vf x; x + x + 1 == 0")));
  CHECK(pretty_print(parse("vf x; x + (x + 1) == 0")) == "vf x; x + (x + 1) == 0");
  CHECK(pretty_print(parse("vf x; forall y:rf. y == ac(x)")) == "vf x; forall y:rf. y == ac(x)");
}

TEST_CASE("interpretation examples") {
  const auto q7 = LocalFieldSpec::qp(7, 6);
  CHECK(interpret(parse("vf x; ord(x) == 2"), q7, {{"x", lf::embed_rational(98, q7)}}) == Truth3::True);
  CHECK(interpret(parse("vf x; ord(x) == 2"), q7, {{"x", lf::embed_rational(99, q7)}}) == Truth3::False);

  Formula cube = parse("exists u:rf. u^3 == 1 && u != 1");
  CHECK(interpret(cube, LocalFieldSpec::qp(7, 3), {}) == Truth3::True);
  CHECK(interpret(cube, LocalFieldSpec::qp(5, 3), {}) == Truth3::False);
  CHECK(interpret(cube, LocalFieldSpec::fpt(7, 3), {}) == Truth3::True);

  // x known only modulo ϖ^N
  Formula z = parse("vf x; x == 0");
  const auto f = LocalFieldSpec::qp(3, 5);
  CHECK(interpret(z, f, {{"x", LFElem::approximate(f, 5, {})}}) == Truth3::Undecided);
  const std::uint32_t box[] = {0, 0, 0, 0, 0};
  CHECK(interpret(z, f, {{"x", LFElem::residue_box(f, box)}}) == Truth3::Undecided);
  CHECK(interpret(z, f, {{"x", lf::embed_rational(Rational(3) * 243, f)}}) == Truth3::False);
  CHECK(interpret(parse("vf x; x - x == 0"), f, {{"x", LFElem::approximate(f, 0, {1})}}) == Truth3::True);

  CHECK_THROWS_AS(interpret(z, f, {}), UnboundVariable);
  CHECK_THROWS_AS(interpret(z, f, {{"x", std::uint32_t{1}}}), SortError);

  // ord(t) == 1 in both characteristics.
  Formula ot = parse("ord(t) == 1 && ac(t) == 1 && ord(t^2 + t^3) == 2");
  for (std::uint32_t p : {2u, 3u, 5u, 7u, 11u, 13u, 101u}) {
    CHECK(interpret(ot, LocalFieldSpec::qp(p, 4), {}) == Truth3::True);
    CHECK(interpret(ot, LocalFieldSpec::fpt(p, 4), {}) == Truth3::True);
  }
  // t maps to p in Q_p and to t in F_p((t)).
  Formula tp = parse("t == 5");
  CHECK(interpret(tp, LocalFieldSpec::qp(5, 4), {}) == Truth3::True);
  CHECK(interpret(tp, LocalFieldSpec::fpt(5, 4), {}) == Truth3::False);
  CHECK(interpret(parse("vf x; ord(x) == inf"), f, {{"x", LFElem::zero(f)}}) == Truth3::True);
}

TEST_CASE("quantifiers") {
  const auto f = LocalFieldSpec::qp(7, 6);
  // ZZ: window search, and syntactic bounds.
  Formula half = parse("zz n; exists m:zz. m + m == n");
  CHECK(interpret(half, f, {{"n", std::int64_t{4}}}) == Truth3::True);
  CHECK(interpret(half, f, {{"n", std::int64_t{5}}}) == Truth3::Undecided);
  Formula bounded = parse("zz n; exists m:zz. 0 <= m && m <= n && m + m == n");
  CHECK(interpret(bounded, f, {{"n", std::int64_t{5}}}) == Truth3::False);
  CHECK(interpret(bounded, f, {{"n", std::int64_t{40}}}) == Truth3::True);
  // VF quantifiers only in oracle mode.
  Formula cr = parse("vf x; exists y:vf. y^3 == x && ord(y) >= 0");
  CHECK_THROWS_AS(interpret(cr, f, {{"x", lf::embed_rational(8, f)}}), UnsupportedFormula);
  InterpretOptions oracle{true};
  CHECK(interpret(cr, f, {{"x", lf::embed_rational(8, f)}}, oracle) == Truth3::True);
  CHECK(interpret(cr, f, {{"x", lf::embed_rational(6, f)}}, oracle) == Truth3::True);  // 6 = 3^3 mod 7
  CHECK(interpret(cr, f, {{"x", lf::embed_rational(3, f)}}, oracle) == Truth3::False);
  const auto g = LocalFieldSpec::fpt(7, 6);
  CHECK(interpret(cr, g, {{"x", lf::embed_rational(6, g)}}, oracle) == Truth3::True);
  // RF quantifier against counting.
  for (std::uint32_t p : {2u, 3u, 5u, 7u, 11u, 13u}) {
    for (const char* body : {"u^3 == 1 && u != 1", "u^2 == 2", "u^2 + u + 1 == 0", "u^4 == 3 && u^2 != 1"}) {
      ParseOptions o{Sort::RF, {}};
      const std::uint64_t c = count_rf_points(parse(body, o), p);
      const Truth3 ex = interpret(parse(std::string("exists u:rf. ") + body), LocalFieldSpec::qp(p, 2), {});
      CHECK((ex == Truth3::True) == (c >= 1));
      CHECK(ex != Truth3::Undecided);
    }
  }
}

TEST_CASE("three-valued monotonicity under refinement") {
  Gen gen{std::mt19937(23)};
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> small(-30, 30), digit(0, 6);
  int decided = 0, total = 0;
  for (int it = 0; it < 150; ++it) {
    Formula phi = parse(gen.full());
    for (auto kind : {lf::FieldKind::CharZero, lf::FieldKind::EqualChar}) {
      const std::uint32_t p = 7;
      const LocalFieldSpec fN{kind, p, 4}, f2N{kind, p, 8};
      // exact values
      const Rational x(small(rng), 1 + digit(rng)), y(small(rng));
      const std::uint32_t u = static_cast<std::uint32_t>(digit(rng));
      const std::int64_t n = small(rng) / 5;
      Truth3 a, b;
      try {
        a = interpret(phi, fN, exact_assignment(fN, x, y, u, n));
        b = interpret(phi, f2N, exact_assignment(f2N, x, y, u, n));
      } catch (const NotPIntegral&) {
        continue;
      }
      ++total;
      if (a != Truth3::Undecided) {
        ++decided;
        CHECK(a == b);
      }
      // residue boxes: the 2N box refines the N box
      std::vector<std::uint32_t> dx(8), dy(8);
      for (auto& d : dx) d = static_cast<std::uint32_t>(digit(rng));
      for (auto& d : dy) d = static_cast<std::uint32_t>(digit(rng));
      Assignment aN{{"x", LFElem::residue_box(fN, std::span(dx).first(4))},
                    {"y", LFElem::residue_box(fN, std::span(dy).first(4))},
                    {"u", u},
                    {"n", n}};
      Assignment a2N{{"x", LFElem::residue_box(f2N, dx)}, {"y", LFElem::residue_box(f2N, dy)}, {"u", u}, {"n", n}};
      try {
        const Truth3 c = interpret(phi, fN, aN), d = interpret(phi, f2N, a2N);
        if (c != Truth3::Undecided) CHECK(c == d);
      } catch (const NotPIntegral&) {
      }
    }
  }
  CHECK(total > 100);
  CHECK(decided > 50);
}

TEST_CASE("residue-field counting") {
  ParseOptions rf{Sort::RF, {}};
  CHECK(count_rf_points(parse("u^3 == 1", rf), 7) == 3);
  CHECK(count_rf_points(parse("u^3 == 1", rf), 5) == 1);
  for (std::uint32_t q : {2u, 3u, 5u, 13u}) CHECK(count_rf_points(parse("u != 0", rf), q) == q - 1);
  CHECK(count_rf_points(parse("exists w. w^2 == u && u != 0", rf), 11) == 5);
  // independent brute force
  for (std::uint32_t q : {3u, 5u, 7u, 11u, 17u}) {
    std::uint64_t expect = 0;
    for (std::uint64_t a = 0; a < q; ++a)
      for (std::uint64_t b = 0; b < q; ++b)
        if ((a * a * b + 3 * b + 1) % q != 0 && (a + b) % q != 2 % q) ++expect;
    CHECK(count_rf_points(parse("rf a, b; a^2*b + 3*b + 1 != 0 && !(a + b == 2)"), q) == expect);
    // the conic a^2 + b^2 = 1 has q - (-1/q) points
    const std::uint64_t conic = q - ((q % 4 == 1) ? 1 : (q % 4 == 3) ? std::uint64_t(-1) : 0);
    CHECK(count_rf_points(parse("rf a, b; a^2 + b^2 == 1"), q) == conic);
  }
  // fixed parameters
  Formula sq = parse("rf a, H; exists e:rf. e != 0 && a^2 * H == e^2 && a != 0");
  CountOptions o;
  o.fixed["H"] = 2;  // 2 is a square mod 7
  CHECK(count_rf_points(sq, 7, o) == 6);
  o.fixed["H"] = 3;
  CHECK(count_rf_points(sq, 7, o) == 0);
  // extra counted dimension
  CountOptions ex;
  ex.counted = {"u", "v"};
  CHECK(count_rf_points(parse("u == 1", rf), 5, ex) == 5);
  CHECK_THROWS_AS(count_rf_points(parse("rf a,b,c,d,e; a == b"), 101), TooLarge);
  CHECK_THROWS_AS(count_rf_points(parse("vf x; x == 0"), 5), UnsupportedFormula);
  CHECK_THROWS_AS(count_rf_points(parse("rf u; u == 0"), 6), InvalidPrime);
}

TEST_CASE("bad primes") {
  auto primes = [](const std::string& s) {
    std::set<std::uint64_t> out;
    for (const auto& [p, r] : bad_primes(parse(s))) out.insert(p);
    return out;
  };
  CHECK(primes("vf x; 3*x == 0") == std::set<std::uint64_t>{3});
  CHECK(bad_primes(parse("vf x; 3*x == 0")).at(3).front().find("not invertible") != std::string::npos);
  CHECK(primes("vf x; x == 0").empty());
  CHECK(primes("vf x; x/2 == 1") == std::set<std::uint64_t>{2});
  CHECK(primes("vf x; ord(6*x) == 0 && ac(x) == 5") == std::set<std::uint64_t>{2, 3, 5});
  CHECK(primes(kFixed[1]).empty());
  Formula f = parse("vf x; x == 0");
  f.bad_prime_log().add(7, "center difference");
  CHECK(primes("vf x; x == 0").empty());
  CHECK(bad_primes(f).count(7) == 1);
}
