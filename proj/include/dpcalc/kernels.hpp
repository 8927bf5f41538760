#pragma once

// Batched modular polynomial evaluation used by residue-field point counting.
// A scalar reference and an AVX2 variant; the variant is chosen at runtime.

#include <cstdint>
#include <span>

namespace dpcalc::kern {

enum class Backend { Scalar, Avx2 };

/// out[j] = (Σ_k coeffs[k] * xs[j]^k) mod m. Coefficients and points must
/// already be reduced mod m; m >= 1.
void horner_mod(std::span<const std::uint32_t> coeffs, std::span<const std::uint32_t> xs, std::uint32_t m,
                std::span<std::uint32_t> out);

namespace scalar {
void horner_mod(std::span<const std::uint32_t> coeffs, std::span<const std::uint32_t> xs, std::uint32_t m,
                std::span<std::uint32_t> out);
}

namespace avx2 {
/// Moduli up to kMaxModulus use vector lanes; larger moduli fall back to scalar.
inline constexpr std::uint32_t kMaxModulus = 1u << 15;
void horner_mod(std::span<const std::uint32_t> coeffs, std::span<const std::uint32_t> xs, std::uint32_t m,
                std::span<std::uint32_t> out);
}  // namespace avx2

bool avx2_supported();
/// Backend used by horner_mod. Defaults to AVX2 when the CPU has it and the
/// environment variable DPCALC_SIMD is not "off".
Backend active_backend();
/// Override for tests; throws std::runtime_error when AVX2 is requested but unsupported.
void set_backend(Backend b);
const char* backend_name(Backend b);

}  // namespace dpcalc::kern
