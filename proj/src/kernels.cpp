#include "psiproc/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "psiproc/error.hpp"

namespace psiproc::kernels {

namespace {

Isa detect() {
  Isa best = isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
  if (const char* env = std::getenv("PSIPROC_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Isa::kScalar;
    if (v == "avx2" && isa_available(Isa::kAvx2)) return Isa::kAvx2;
  }
  return best;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(PSIPROC_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_available(isa)) throw DomainError("requested SIMD level is not available");
  current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

#if defined(PSIPROC_HAVE_AVX2_KERNELS)
#define PSIPROC_DISPATCH(fn, ...) \
  (active_isa() == Isa::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define PSIPROC_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void psi_eval(PsiCoefs c, std::span<const double> u, double* Psi, double* psi, double* dpsi) {
  PSIPROC_DISPATCH(psi_eval, c, u, Psi, psi, dpsi);
}

double weighted_abs_diff(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b, double scale) {
  return PSIPROC_DISPATCH(weighted_abs_diff, w, a, b, scale);
}

double weighted_sum(std::span<const double> w, std::span<const double> f) {
  return PSIPROC_DISPATCH(weighted_sum, w, f);
}

void condition_ratio(std::span<const double> z, std::span<const double> Fp,
                     std::span<const double> psi, std::span<const double> dpsi, double* out) {
  PSIPROC_DISPATCH(condition_ratio, z, Fp, psi, dpsi, out);
}

}  // namespace psiproc::kernels
