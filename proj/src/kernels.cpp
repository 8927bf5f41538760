#include "dpcalc/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace dpcalc::kern {

namespace scalar {
void horner_mod(std::span<const std::uint32_t> coeffs, std::span<const std::uint32_t> xs, std::uint32_t m,
                std::span<std::uint32_t> out) {
  for (std::size_t j = 0; j < xs.size(); ++j) {
    std::uint64_t acc = 0;
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = (acc * xs[j] + coeffs[k]) % m;
    out[j] = static_cast<std::uint32_t>(acc);
  }
}
}  // namespace scalar

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Backend initial_backend() {
  const char* env = std::getenv("DPCALC_SIMD");
  if (env && std::strcmp(env, "off") == 0) return Backend::Scalar;
  return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> b{initial_backend()};
  return b;
}

}  // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported()) throw std::runtime_error("AVX2 not supported on this CPU");
  backend_slot().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

void horner_mod(std::span<const std::uint32_t> coeffs, std::span<const std::uint32_t> xs, std::uint32_t m,
                std::span<std::uint32_t> out) {
  if (active_backend() == Backend::Avx2)
    avx2::horner_mod(coeffs, xs, m, out);
  else
    scalar::horner_mod(coeffs, xs, m, out);
}

}  // namespace dpcalc::kern
