#include "psiproc/limit_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>

#include "psiproc/error.hpp"
#include "psiproc/kernels.hpp"

namespace psiproc {

namespace {

constexpr double kZMaxExp = 40.0;
constexpr double kZMaxPower = 1e4;

// psi on [0,1]; the shooting iterates may overshoot F = 1, where psi is
// continued by its boundary value.
double psi_clamped(const PsiSpec& spec, double F) {
  return spec.eval(std::clamp(F, 0.0, 1.0)).psi;
}

std::size_t index_near(const std::vector<double>& z, double x) {
  auto it = std::lower_bound(z.begin(), z.end(), x);
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - z.begin(), z.size() - 1));
}

// Local power-law exponent -d ln f / d ln z from the last grid point and the
// one nearest z_max / 4.
double log_slope_decay(const std::vector<double>& z, const std::vector<double>& f) {
  const std::size_t m = z.size() - 1;
  const std::size_t j = index_near(z, z[m] / 4.0);
  if (j >= m || f[m] <= 0.0 || f[j] <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(f[m] / f[j]) / std::log(z[m] / z[j]);
}

// int_0^zmax f over the grid with endpoint-derivative corrections
// (fourth order for smooth f).
double hermite_quadrature(const std::vector<double>& z, const std::vector<double>& f,
                          const std::vector<double>& df) {
  const std::size_t n = z.size();
  std::vector<double> wf(n, 0.0), wd(n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = z[i + 1] - z[i];
    wf[i] += 0.5 * h;
    wf[i + 1] += 0.5 * h;
    wd[i] += h * h / 12.0;
    wd[i + 1] -= h * h / 12.0;
  }
  return kernels::weighted_sum(wf, f) + kernels::weighted_sum(wd, df);
}

}  // namespace

const char* tail_name(TailKind kind) {
  switch (kind) {
    case TailKind::kExp:
      return "EXP";
    case TailKind::kPower:
      return "POWER";
    case TailKind::kNone:
      break;
  }
  return "NONE";
}

nlohmann::json ValidationReport::to_json() const {
  return {{"integro_residual", integro_residual},
          {"norm_value", norm_value},
          {"norm_residual", norm_residual},
          {"lambda_identity", lambda_identity},
          {"lambda_residual", lambda_residual},
          {"sup_Fp", sup_Fp},
          {"argsup_Fp", argsup_Fp},
          {"sup_zFp", sup_zFp},
          {"argsup_zFp", argsup_zFp},
          {"monotonicity_violations", monotonicity_violations},
          {"min_E_minus_p1z", min_E_minus_p1z}};
}

std::vector<double> graded_grid(double z_max, std::size_t steps) {
  if (!(z_max > 0.0) || steps < 11) throw DomainError("grid needs z_max > 0 and at least 11 steps");
  std::vector<double> z;
  z.reserve(steps + 1);
  if (z_max <= 1.0) {
    for (std::size_t i = 0; i <= steps; ++i) z.push_back(z_max * static_cast<double>(i) / steps);
    return z;
  }
  const std::size_t n_uniform = std::max<std::size_t>(1, (steps + 5) / 11);
  const std::size_t n_geom = steps - n_uniform;
  for (std::size_t i = 0; i <= n_uniform; ++i) z.push_back(static_cast<double>(i) / n_uniform);
  const double log_ratio = std::log(z_max) / static_cast<double>(n_geom);
  for (std::size_t j = 1; j < n_geom; ++j) z.push_back(std::exp(log_ratio * static_cast<double>(j)));
  z.push_back(z_max);
  return z;
}

double default_z_max(const PsiSpec& spec) {
  const double psi1 = spec.eval(1.0).psi;
  if (psi1 <= 0.0) return kZMaxPower;
  return std::min(kZMaxPower, kZMaxExp / std::min(1.0, psi1));
}

LimitCurve integrate_given_lambda(const PsiSpec& spec, double lambda, double z_max,
                                  std::size_t steps) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (steps < 1000) throw DomainError("integration needs at least 1000 steps");
  LimitCurve c;
  c.z = graded_grid(z_max, steps);
  c.lambda = lambda;
  c.spec_id = spec.id();
  c.z_max = z_max;
  const std::size_t n = c.z.size();
  c.F.assign(n, 0.0);
  c.E.assign(n, 0.0);
  c.Fp.assign(n, 0.0);
  c.psiF.assign(n, 0.0);
  c.psiF[0] = psi_clamped(spec, 0.0);

  // y = (F, E);  F' = lambda z exp(-E),  E' = psi(F)
  auto dF = [lambda](double z, double E) { return lambda * z * std::exp(-E); };
  double F = 0.0, E = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double z0 = c.z[i];
    const double h = c.z[i + 1] - z0;
    const double zm = z0 + 0.5 * h;
    const double k1F = dF(z0, E), k1E = psi_clamped(spec, F);
    const double k2F = dF(zm, E + 0.5 * h * k1E), k2E = psi_clamped(spec, F + 0.5 * h * k1F);
    const double k3F = dF(zm, E + 0.5 * h * k2E), k3E = psi_clamped(spec, F + 0.5 * h * k2F);
    const double k4F = dF(z0 + h, E + h * k3E), k4E = psi_clamped(spec, F + h * k3F);
    F += h / 6.0 * (k1F + 2.0 * k2F + 2.0 * k3F + k4F);
    E += h / 6.0 * (k1E + 2.0 * k2E + 2.0 * k3E + k4E);
    if (!std::isfinite(F) || !std::isfinite(E))
      throw NumericalBlowupError(fmt::format("non-finite state at z = {} (lambda = {})", c.z[i + 1], lambda));
    c.F[i + 1] = F;
    c.E[i + 1] = E;
    c.Fp[i + 1] = dF(c.z[i + 1], E);
    c.psiF[i + 1] = psi_clamped(spec, F);
  }

  const std::size_t m = n - 1;
  if (spec.eval(1.0).psi > 0.0) {
    const double a = c.psiF[m];
    c.tail.kind = TailKind::kExp;
    c.tail.rate = a;
    c.tail.mass = lambda * std::exp(-c.E[m]) * (c.z[m] / a + 1.0 / (a * a));
  } else {
    const double eps = log_slope_decay(c.z, c.Fp) - 1.0;
    c.tail.kind = TailKind::kPower;
    c.tail.exponent = eps;
    c.tail.mass = c.Fp[m] == 0.0 ? 0.0 : c.Fp[m] * c.z[m] / std::max(eps, 1e-3);
  }
  c.F_inf = c.F[m] + c.tail.mass;
  if (!std::isfinite(c.F_inf)) throw NumericalBlowupError("non-finite tail mass");
  return c;
}

double LimitCurve::eval(double x) const {
  if (x <= 0.0) return 0.0;
  const std::size_t m = z.size() - 1;
  if (x >= z_max) {
    if (tail.kind == TailKind::kExp) {
      const double a = tail.rate;
      return F_inf - lambda * std::exp(-E[m] - a * (x - z[m])) * (x / a + 1.0 / (a * a));
    }
    if (tail.kind == TailKind::kPower && tail.exponent > 0.0)
      return F_inf - tail.mass * std::pow(x / z[m], -tail.exponent);
    return F[m];
  }
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(z.begin(), z.end(), x) - z.begin()) - 1;
  const double h = z[i + 1] - z[i];
  const double t = (x - z[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * F[i] + (t3 - 2 * t2 + t) * h * Fp[i] + (-2 * t3 + 3 * t2) * F[i + 1] +
         (t3 - t2) * h * Fp[i + 1];
}

double LimitCurve::eval_derivative(double x) const {
  if (x <= 0.0) return 0.0;
  const std::size_t m = z.size() - 1;
  if (x >= z_max) {
    if (tail.kind == TailKind::kExp) return lambda * x * std::exp(-E[m] - tail.rate * (x - z[m]));
    if (tail.kind == TailKind::kPower) return Fp[m] * std::pow(x / z[m], -1.0 - tail.exponent);
    return 0.0;
  }
  const std::size_t i = static_cast<std::size_t>(std::upper_bound(z.begin(), z.end(), x) - z.begin()) - 1;
  const double h = z[i + 1] - z[i];
  const double t = (x - z[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double e = (2 * t3 - 3 * t2 + 1) * E[i] + (t3 - 2 * t2 + t) * h * psiF[i] +
                   (-2 * t3 + 3 * t2) * E[i + 1] + (t3 - t2) * h * psiF[i + 1];
  return lambda * x * std::exp(-e);
}

LimitCurve solve_f(const PsiSpec& spec, const SolveOptions& opts) {
  const double z_max = opts.z_max.value_or(default_z_max(spec));
  auto f_inf = [&](double lambda) { return integrate_given_lambda(spec, lambda, z_max, opts.steps).F_inf; };

  double lo = opts.lambda_lo, hi = opts.lambda_hi;
  if (!(lo > 0.0 && hi > lo)) throw DomainError("invalid initial lambda bracket");
  double f_lo = f_inf(lo), f_hi = f_inf(hi);
  for (int i = 0; i < 60 && f_lo >= 1.0; ++i) f_lo = f_inf(lo *= 0.5);
  for (int i = 0; i < 60 && f_hi <= 1.0; ++i) f_hi = f_inf(hi *= 2.0);
  if (!(f_lo < 1.0 && f_hi > 1.0))
    throw SolverError(fmt::format("could not bracket F(inf) = 1: F({}) = {}, F({}) = {}", lo, f_lo, hi, f_hi));

  // F(inf; lambda) must increase across the bracket for bisection to be sound.
  double prev = f_lo;
  for (int i = 1; i <= 8; ++i) {
    const double lam = lo + (hi - lo) * i / 9.0;
    const double v = f_inf(lam);
    if (!(v > prev))
      throw SolverError(fmt::format("F(inf; lambda) not increasing on [{}, {}]: F({}) = {} after {}", lo, hi,
                                    lam, v, prev));
    prev = v;
  }
  if (!(f_hi > prev)) throw SolverError("F(inf; lambda) not increasing at the bracket end");

  for (int it = 0; it < 200 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f_inf(mid) < 1.0 ? lo : hi) = mid;
  }
  LimitCurve curve = integrate_given_lambda(spec, 0.5 * (lo + hi), z_max, opts.steps);
  if (std::fabs(curve.F_inf - 1.0) > opts.tol)
    throw SolverError(fmt::format("shooting stalled: |F(inf) - 1| = {} at lambda = {}",
                                  std::fabs(curve.F_inf - 1.0), curve.lambda));
  curve.validation = validate_curve(curve, spec);
  return curve;
}

ValidationReport validate_curve(const LimitCurve& c, const PsiSpec& spec) {
  ValidationReport r;
  const std::size_t n = c.z.size();
  const std::size_t m = n - 1;
  const double lambda = c.lambda;
  const double psi0 = spec.eval(0.0).psi;
  const double p1 = spec.weight(1);

  std::vector<double> Fc(n), Psi(n), psi(n), dpsi(n);
  for (std::size_t i = 0; i < n; ++i) Fc[i] = std::clamp(c.F[i], 0.0, 1.0);
  eval_batch(spec, Fc, Psi, psi, dpsi);

  // (a) F'(z) = z int_z^inf psi(F(y)) F'(y) / y dy, with psi(F) F'/y = psi(F) lambda e^{-E}.
  std::vector<double> g(n), dg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = lambda * std::exp(-c.E[i]);
    g[i] = psi[i] * k;
    dg[i] = k * (dpsi[i] * c.Fp[i] - psi[i] * psi[i]);
  }
  const double comp_m = spec.complement(Fc[m]);
  double tail_g = 0.0;
  double comp_decay = 0.0;  // power-law decay of 1 - Psi(F)
  if (c.tail.kind == TailKind::kExp) {
    tail_g = lambda * std::exp(-c.E[m]) * psi[m] / c.tail.rate;
  } else {
    std::vector<double> comp(n);
    for (std::size_t i = 0; i < n; ++i) comp[i] = spec.complement(Fc[i]);
    comp_decay = log_slope_decay(c.z, comp);
    tail_g = comp_m / c.z[m] * comp_decay / (comp_decay + 1.0);
  }
  double acc = tail_g;
  for (std::size_t i = m + 1; i-- > 0;) {
    if (i < m) {
      const double h = c.z[i + 1] - c.z[i];
      acc += 0.5 * h * (g[i] + g[i + 1]) + h * h / 12.0 * (dg[i] - dg[i + 1]);
    }
    r.integro_residual = std::max(r.integro_residual, std::fabs(c.Fp[i] - c.z[i] * acc));
  }

  // (b) int x^{-2} F dx and (c) int x^{-2} Psi(F) dx.
  std::vector<double> h1(n), dh1(n), h2(n), dh2(n);
  h1[0] = 0.5 * lambda;
  dh1[0] = -lambda * psi0 / 3.0;
  h2[0] = 0.5 * lambda * psi0;
  dh2[0] = -lambda * psi0 * psi0 / 3.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double x = c.z[i];
    h1[i] = c.F[i] / (x * x);
    dh1[i] = (x * c.Fp[i] - 2.0 * c.F[i]) / (x * x * x);
    h2[i] = Psi[i] / (x * x);
    dh2[i] = (x * psi[i] * c.Fp[i] - 2.0 * Psi[i]) / (x * x * x);
  }
  const double zm = c.z[m];
  const double G_m = c.F_inf - c.F[m];
  const double Psi_inf = spec.eval(std::clamp(c.F_inf, 0.0, 1.0)).Psi;
  double tail_norm, tail_lambda;
  if (c.tail.kind == TailKind::kExp) {
    tail_norm = c.F_inf / zm - G_m / (c.tail.rate * zm * zm);
    tail_lambda = Psi_inf / zm - (Psi_inf - Psi[m]) / (c.tail.rate * zm * zm);
  } else {
    const double eps = std::max(c.tail.exponent, 1e-3);
    tail_norm = c.F_inf / zm - G_m / ((1.0 + eps) * zm);
    tail_lambda = Psi_inf / zm - (Psi_inf - Psi[m]) / ((1.0 + comp_decay) * zm);
  }
  r.norm_value = hermite_quadrature(c.z, h1, dh1) + tail_norm;
  r.norm_residual = std::fabs(r.norm_value - 1.0);
  r.lambda_identity = hermite_quadrature(c.z, h2, dh2) + tail_lambda;
  r.lambda_residual = std::fabs(lambda - r.lambda_identity);

  // (d) sup F', sup z F'; (e) monotonicity; E >= p_1 z.
  r.min_E_minus_p1z = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (c.Fp[i] > r.sup_Fp) {
      r.sup_Fp = c.Fp[i];
      r.argsup_Fp = c.z[i];
    }
    if (c.z[i] * c.Fp[i] > r.sup_zFp) {
      r.sup_zFp = c.z[i] * c.Fp[i];
      r.argsup_zFp = c.z[i];
    }
    if (i > 0 && c.F[i] < c.F[i - 1]) ++r.monotonicity_violations;
    r.min_E_minus_p1z = std::min(r.min_E_minus_p1z, c.E[i] - p1 * c.z[i]);
  }
  return r;
}

void write_curve_csv(std::ostream& os, const LimitCurve& curve, const PsiSpec& spec) {
  os << "# spec " << spec.to_json().dump() << "\n";
  os << fmt::format("# lambda {:.17g}\n", curve.lambda);
  os << fmt::format("# z_max {:.17g}\n", curve.z_max);
  os << fmt::format("# tail {} rate={:.17g} exponent={:.17g} mass={:.17g}\n", tail_name(curve.tail.kind),
                    curve.tail.rate, curve.tail.exponent, curve.tail.mass);
  if (curve.validation) os << "# residuals " << curve.validation->to_json().dump() << "\n";
  os << "z,F,Fp\n";
  for (std::size_t i = 0; i < curve.z.size(); ++i)
    os << fmt::format("{:.17g},{:.17g},{:.17g}\n", curve.z[i], curve.F[i], curve.Fp[i]);
}

}  // namespace psiproc
