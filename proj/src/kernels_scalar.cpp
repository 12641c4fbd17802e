#include "psiproc/kernels.hpp"

#include <cmath>

namespace psiproc::kernels::scalar {

void psi_eval(PsiCoefs c, std::span<const double> u, double* Psi, double* psi, double* dpsi) {
  const std::size_t order = c.pos.size() - 1;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = u[i];
    const double y = 1.0 - x;
    // Powers x^{j-2}, x^{j-1}, x^j (and likewise for y) carried through the loop.
    double px2 = 0.0, px1 = 1.0, py2 = 0.0, py1 = 1.0;
    double big = 0.0, neg_mass = 0.0, small = 0.0, d1 = 0.0, d2 = 0.0;
    for (std::size_t j = 1; j <= order; ++j) {
      const double px = px1 * x;
      const double py = py1 * y;
      const double a = c.pos[j];
      const double b = c.neg[j];
      const double fj = static_cast<double>(j);
      big += a * px;
      neg_mass += b;
      small += b * py;
      d1 += fj * (a * px1 + b * py1);
      d2 += fj * (fj - 1.0) * (a * px2 - b * py2);
      px2 = px1;
      px1 = px;
      py2 = py1;
      py1 = py;
    }
    if (Psi) Psi[i] = big + (neg_mass - small);
    if (psi) psi[i] = d1;
    if (dpsi) dpsi[i] = d2;
  }
}

double weighted_abs_diff(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b, double scale) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * std::fabs(a[i] - scale * b[i]);
  return acc;
}

double weighted_sum(std::span<const double> w, std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * f[i];
  return acc;
}

void condition_ratio(std::span<const double> z, std::span<const double> Fp,
                     std::span<const double> psi, std::span<const double> dpsi, double* out) {
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = std::fabs(z[i] * dpsi[i] * Fp[i] - psi[i]) / psi[i];
}

}  // namespace psiproc::kernels::scalar
