#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <string>
#include <string_view>

namespace dpcalc {

using Integer = mpz_class;
using Rational = mpq_class;

/// Renders as "num/den" (always with a denominator, "0/1" for zero).
std::string to_string(const Rational& r);
/// Accepts "n", "-n", "n/d".
Rational parse_rational(std::string_view text);

Rational make_rational(const Integer& num, const Integer& den);

bool is_prime(std::uint64_t n);

// p-adic valuation; the argument must be nonzero.
long valuation(const Integer& n, unsigned long p);
long valuation(const Rational& r, unsigned long p);

Integer ipow(unsigned long base, unsigned long exp);
/// b^e for any integer e (b nonzero when e < 0).
Rational rpow(const Rational& b, long e);

}  // namespace dpcalc
