#pragma once

#include <functional>
#include <map>
#include <string>

#include "dpcalc/formula.hpp"
#include "mpoly.hpp"

namespace dpcalc::fm::detail_fm {

/// Expansion of ord/ac subterms (or anything non-polynomial); empty means reject.
using OpaqueFn = std::function<detail::MPoly(const TermPtr&)>;

/// Polynomial of a VF or RF term over the given variable slots; `t` goes into the coefficients.
detail::MPoly expand(const TermPtr& t, const std::map<std::string, std::size_t>& slots, std::size_t n,
                     const OpaqueFn& opaque);

std::vector<std::uint64_t> prime_factors(Integer n);

}  // namespace dpcalc::fm::detail_fm
