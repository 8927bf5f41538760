#include "dpcalc/rational.hpp"

#include <stdexcept>

namespace dpcalc {

std::string to_string(const Rational& r) {
  return r.get_num().get_str() + "/" + r.get_den().get_str();
}

Rational parse_rational(std::string_view text) {
  std::string s(text);
  auto slash = s.find('/');
  Integer num, den = 1;
  try {
    if (slash == std::string::npos) {
      num = Integer(s);
    } else {
      num = Integer(s.substr(0, slash));
      den = Integer(s.substr(slash + 1));
    }
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("not a rational number: '" + s + "'");
  }
  if (den == 0) throw std::invalid_argument("zero denominator in '" + s + "'");
  return make_rational(num, den);
}

Rational make_rational(const Integer& num, const Integer& den) {
  Rational r(num, den);
  r.canonicalize();
  return r;
}

bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d)
    if (n % d == 0) return false;
  return true;
}

long valuation(const Integer& n, unsigned long p) {
  if (n == 0) throw std::domain_error("valuation of zero");
  Integer m = abs(n);
  long v = 0;
  while (mpz_divisible_ui_p(m.get_mpz_t(), p)) {
    mpz_divexact_ui(m.get_mpz_t(), m.get_mpz_t(), p);
    ++v;
  }
  return v;
}

long valuation(const Rational& r, unsigned long p) {
  return valuation(r.get_num(), p) - (r.get_den() == 1 ? 0 : valuation(r.get_den(), p));
}

Integer ipow(unsigned long base, unsigned long exp) {
  Integer out;
  mpz_ui_pow_ui(out.get_mpz_t(), base, exp);
  return out;
}

Rational rpow(const Rational& b, long e) {
  if (e == 0) return 1;
  Integer num, den;
  unsigned long k = static_cast<unsigned long>(e < 0 ? -e : e);
  mpz_pow_ui(num.get_mpz_t(), b.get_num_mpz_t(), k);
  mpz_pow_ui(den.get_mpz_t(), b.get_den_mpz_t(), k);
  if (e < 0) {
    if (num == 0) throw std::domain_error("zero to a negative power");
    return make_rational(den, num);
  }
  return make_rational(num, den);
}

}  // namespace dpcalc
