#pragma once

// Data-parallel inner loops used by the solver, the condition checker and the
// empirical-distance quadrature. Each kernel has a scalar reference version
// and an AVX2 version; the dispatching entry points pick one at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace psiproc::kernels {

enum class Isa { kScalar, kAvx2 };

// Coefficient view for the interpolation family: pos[j] multiplies u^j,
// neg[j] multiplies 1 - (1-u)^j. Both have length order + 1.
struct PsiCoefs {
  std::span<const double> pos;
  std::span<const double> neg;
};

bool isa_available(Isa isa);
// Kernel set in use. Defaults to the widest available ISA; the environment
// variable PSIPROC_SIMD=scalar|avx2 overrides it.
Isa active_isa();
// Test hook. Throws DomainError if the ISA is not available on this CPU.
void force_isa(Isa isa);
std::string_view isa_name(Isa isa);

namespace scalar {
void psi_eval(PsiCoefs c, std::span<const double> u, double* Psi, double* psi, double* dpsi);
double weighted_abs_diff(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b, double scale);
double weighted_sum(std::span<const double> w, std::span<const double> f);
void condition_ratio(std::span<const double> z, std::span<const double> Fp,
                     std::span<const double> psi, std::span<const double> dpsi, double* out);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define PSIPROC_HAVE_AVX2_KERNELS 1
namespace avx2 {
void psi_eval(PsiCoefs c, std::span<const double> u, double* Psi, double* psi, double* dpsi);
double weighted_abs_diff(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b, double scale);
double weighted_sum(std::span<const double> w, std::span<const double> f);
void condition_ratio(std::span<const double> z, std::span<const double> Fp,
                     std::span<const double> psi, std::span<const double> dpsi, double* out);
}  // namespace avx2
#endif

// Dispatching entry points. Output pointers may be null to skip a quantity.
void psi_eval(PsiCoefs c, std::span<const double> u, double* Psi, double* psi, double* dpsi);
// sum_i w_i |a_i - scale * b_i|
double weighted_abs_diff(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b, double scale);
// sum_i w_i f_i
double weighted_sum(std::span<const double> w, std::span<const double> f);
// out_i = |z_i dpsi_i Fp_i - psi_i| / psi_i
void condition_ratio(std::span<const double> z, std::span<const double> Fp,
                     std::span<const double> psi, std::span<const double> dpsi, double* out);

}  // namespace psiproc::kernels
