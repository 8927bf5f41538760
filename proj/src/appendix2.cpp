#include <algorithm>
#include <mutex>

#include "dpcalc/motivic.hpp"

namespace dpcalc::mot {

// Level-0 fixtures: a, b, c, d stand for the residues of the matrix entries.
const char* const kAppendix2PhiEta =
    "rf a, b, c, d, eta;\n"
    "a*d - b*c == 1 && exists xi:rf. b^2 - d^2*eta == xi^2\n";
const char* const kAppendix2PhiEtaSwapped =
    "rf a, b, c, d, eta;\n"
    "a*d - b*c == 1 && exists xi:rf. d^2 - b^2*eta == xi^2\n";
const char* const kAppendix2PhiSummed =
    "rf a, b, c, d, eta;\n"
    "a*d - b*c == 1 && (exists xi:rf. xi != 0 && d^2 - b^2*eta == xi^2) && !(exists beta:rf. eta == beta^2)\n";

Appendix2Steps appendix2_steps() {
  const SymA L = SymA::L();
  const SymA half(Rational(1, 2));
  Appendix2Steps s;
  s.cone = SymA(2) * (L - SymA(1)) + SymA(1);
  s.split = half * (L - SymA(1)) * (L - SymA(1));
  s.nonsplit = L * L - s.split - s.cone;
  s.m1 = s.nonsplit * (L - SymA(1));
  s.unit_b_total = half * L * s.m1;
  s.unit_b_per_eta = a_div_by_unit(SymA(2) * s.unit_b_total, L - SymA(1));
  s.nonunit_b = L * (L - SymA(1));
  s.total = s.unit_b_per_eta + s.nonunit_b;
  return s;
}

SymA appendix2_symbolic() { return appendix2_steps().total; }

namespace {

void check_q(std::uint32_t q) {
  if (q < 5 || q % 2 == 0 || !is_prime(q)) throw InvalidPrime("q = " + std::to_string(q) + " must be an odd prime >= 5");
}

const fm::Formula& fixture(const char* text) {
  static std::mutex mu;
  static std::map<const char*, fm::Formula> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(text);
  if (it == cache.end()) {
    fm::ParseOptions po;
    po.default_sort = fm::Sort::RF;
    it = cache.emplace(text, fm::parse(text, po)).first;
  }
  return it->second;
}

}  // namespace

std::vector<std::uint32_t> nonsquares(std::uint32_t q) {
  std::vector<bool> sq(q, false);
  for (std::uint64_t x = 1; x < q; ++x) sq[x * x % q] = true;
  std::vector<std::uint32_t> out;
  for (std::uint32_t x = 1; x < q; ++x)
    if (!sq[x]) out.push_back(x);
  return out;
}

std::uint64_t appendix2_count(EtaMode mode, std::uint32_t q, std::uint32_t eta, bool swapped) {
  check_q(q);
  fm::CountOptions co;
  co.counted = {"a", "b", "c", "d"};
  if (mode == EtaMode::SummedOverNonsquares) {
    co.counted.push_back("eta");
    return fm::count_rf_points(fixture(kAppendix2PhiSummed), q, co);
  }
  const auto ns = nonsquares(q);
  if (std::find(ns.begin(), ns.end(), eta % q) == ns.end())
    throw std::invalid_argument(std::to_string(eta) + " is not a non-square mod " + std::to_string(q));
  co.fixed["eta"] = eta % q;
  return fm::count_rf_points(fixture(swapped ? kAppendix2PhiEtaSwapped : kAppendix2PhiEta), q, co);
}

Rational appendix2_volume(EtaMode mode, std::uint32_t q, std::uint32_t eta) {
  check_q(q);
  if (mode == EtaMode::PerEta && eta == 0) eta = nonsquares(q).front();
  const std::uint64_t n = appendix2_count(mode, q, eta);
  return Rational(static_cast<unsigned long>(n)) / Rational(ipow(q, 3));
}

}  // namespace dpcalc::mot
