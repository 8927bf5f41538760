#include <immintrin.h>

#include "dpcalc/kernels.hpp"

namespace dpcalc::kern::avx2 {

namespace {

// a mod m for 0 <= a < 2^31, via a double-precision quotient and one correction.
inline __m256i reduce(__m256i a, __m256i vm, __m256d inv_m) {
  __m256d lo = _mm256_cvtepi32_pd(_mm256_castsi256_si128(a));
  __m256d hi = _mm256_cvtepi32_pd(_mm256_extracti128_si256(a, 1));
  __m128i qlo = _mm256_cvttpd_epi32(_mm256_floor_pd(_mm256_mul_pd(lo, inv_m)));
  __m128i qhi = _mm256_cvttpd_epi32(_mm256_floor_pd(_mm256_mul_pd(hi, inv_m)));
  __m256i q = _mm256_inserti128_si256(_mm256_castsi128_si256(qlo), qhi, 1);
  __m256i r = _mm256_sub_epi32(a, _mm256_mullo_epi32(q, vm));
  // r in (-m, 2m)
  __m256i neg = _mm256_cmpgt_epi32(_mm256_setzero_si256(), r);
  r = _mm256_add_epi32(r, _mm256_and_si256(neg, vm));
  __m256i big = _mm256_cmpgt_epi32(r, _mm256_sub_epi32(vm, _mm256_set1_epi32(1)));
  return _mm256_sub_epi32(r, _mm256_and_si256(big, vm));
}

}  // namespace

void horner_mod(std::span<const std::uint32_t> coeffs, std::span<const std::uint32_t> xs, std::uint32_t m,
                std::span<std::uint32_t> out) {
  if (m > kMaxModulus || m < 2) {
    scalar::horner_mod(coeffs, xs, m, out);
    return;
  }
  const __m256i vm = _mm256_set1_epi32(static_cast<int>(m));
  const __m256d inv_m = _mm256_set1_pd(1.0 / static_cast<double>(m));
  std::size_t j = 0;
  for (; j + 8 <= xs.size(); j += 8) {
    __m256i x = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(xs.data() + j));
    __m256i acc = _mm256_setzero_si256();
    for (std::size_t k = coeffs.size(); k-- > 0;) {
      // acc * x + c < m^2 + m < 2^31
      acc = _mm256_add_epi32(_mm256_mullo_epi32(acc, x), _mm256_set1_epi32(static_cast<int>(coeffs[k])));
      acc = reduce(acc, vm, inv_m);
    }
    _mm256_storeu_si256(reinterpret_cast<__m256i*>(out.data() + j), acc);
  }
  if (j < xs.size()) scalar::horner_mod(coeffs, xs.subspan(j), m, out.subspan(j));
}

}  // namespace dpcalc::kern::avx2
