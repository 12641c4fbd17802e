// Compiled with -mavx2 (no FMA contraction) so psi_eval matches the scalar
// kernel bit for bit; the reductions differ only by summation order.
#include "psiproc/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace psiproc::kernels::avx2 {

namespace {

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void psi_eval(PsiCoefs c, std::span<const double> u, double* Psi, double* psi, double* dpsi) {
  const std::size_t order = c.pos.size() - 1;
  const std::size_t n = u.size();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(u.data() + i);
    const __m256d y = _mm256_sub_pd(one, x);
    __m256d px2 = _mm256_setzero_pd(), px1 = one, py2 = _mm256_setzero_pd(), py1 = one;
    __m256d big = _mm256_setzero_pd(), small = _mm256_setzero_pd();
    __m256d d1 = _mm256_setzero_pd(), d2 = _mm256_setzero_pd();
    double neg_mass = 0.0;
    for (std::size_t j = 1; j <= order; ++j) {
      const __m256d px = _mm256_mul_pd(px1, x);
      const __m256d py = _mm256_mul_pd(py1, y);
      const __m256d a = _mm256_set1_pd(c.pos[j]);
      const __m256d b = _mm256_set1_pd(c.neg[j]);
      const double fj = static_cast<double>(j);
      const __m256d vj = _mm256_set1_pd(fj);
      const __m256d vjj = _mm256_set1_pd(fj * (fj - 1.0));
      big = _mm256_add_pd(big, _mm256_mul_pd(a, px));
      neg_mass += c.neg[j];
      small = _mm256_add_pd(small, _mm256_mul_pd(b, py));
      d1 = _mm256_add_pd(
          d1, _mm256_mul_pd(vj, _mm256_add_pd(_mm256_mul_pd(a, px1), _mm256_mul_pd(b, py1))));
      d2 = _mm256_add_pd(
          d2, _mm256_mul_pd(vjj, _mm256_sub_pd(_mm256_mul_pd(a, px2), _mm256_mul_pd(b, py2))));
      px2 = px1;
      px1 = px;
      py2 = py1;
      py1 = py;
    }
    if (Psi)
      _mm256_storeu_pd(Psi + i,
                       _mm256_add_pd(big, _mm256_sub_pd(_mm256_set1_pd(neg_mass), small)));
    if (psi) _mm256_storeu_pd(psi + i, d1);
    if (dpsi) _mm256_storeu_pd(dpsi + i, d2);
  }
  if (i < n)
    scalar::psi_eval(c, u.subspan(i), Psi ? Psi + i : nullptr, psi ? psi + i : nullptr,
                     dpsi ? dpsi + i : nullptr);
}

double weighted_abs_diff(std::span<const double> w, std::span<const double> a,
                         std::span<const double> b, double scale) {
  const std::size_t n = w.size();
  const __m256d s = _mm256_set1_pd(scale);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + i),
                                    _mm256_mul_pd(s, _mm256_loadu_pd(b.data() + i)));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w.data() + i), abs_pd(d)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += w[i] * std::fabs(a[i] - scale * b[i]);
  return total;
}

double weighted_sum(std::span<const double> w, std::span<const double> f) {
  const std::size_t n = w.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w.data() + i),
                                           _mm256_loadu_pd(f.data() + i)));
  double total = hsum(acc);
  for (; i < n; ++i) total += w[i] * f[i];
  return total;
}

void condition_ratio(std::span<const double> z, std::span<const double> Fp,
                     std::span<const double> psi, std::span<const double> dpsi, double* out) {
  const std::size_t n = z.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_loadu_pd(psi.data() + i);
    const __m256d num = _mm256_sub_pd(
        _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(z.data() + i), _mm256_loadu_pd(dpsi.data() + i)),
                      _mm256_loadu_pd(Fp.data() + i)),
        p);
    _mm256_storeu_pd(out + i, _mm256_div_pd(abs_pd(num), p));
  }
  for (; i < n; ++i) out[i] = std::fabs(z[i] * dpsi[i] * Fp[i] - psi[i]) / psi[i];
}

}  // namespace psiproc::kernels::avx2
