#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "psiproc/psi_model.hpp"

namespace psiproc {

enum class TailKind { kNone, kExp, kPower };

// Extrapolation of F beyond the last grid point.
//   kExp:   F'(z) ~ lambda z exp(-E(z_max) - rate (z - z_max))
//   kPower: F'(z) ~ C z^{-1-exponent}
struct TailModel {
  TailKind kind = TailKind::kNone;
  double rate = 0.0;      // kExp
  double exponent = 0.0;  // kPower
  double mass = 0.0;      // mass of F beyond z_max
};

const char* tail_name(TailKind kind);

struct ValidationReport {
  double integro_residual = 0.0;  // max_z |F'(z) - z int_z^inf psi(F) dF / y|
  double norm_value = 0.0;        // int x^{-2} F dx
  double norm_residual = 0.0;     // |norm_value - 1|
  double lambda_identity = 0.0;   // int x^{-2} Psi(F) dx
  double lambda_residual = 0.0;   // |lambda - lambda_identity|
  double sup_Fp = 0.0;
  double argsup_Fp = 0.0;
  double sup_zFp = 0.0;
  double argsup_zFp = 0.0;
  std::size_t monotonicity_violations = 0;
  // min_z (E(z) - p_1 z); nonnegative when the solution respects psi >= p_1.
  double min_E_minus_p1z = 0.0;

  nlohmann::json to_json() const;
};

// Gridded solution of the limit equation
//   z F'' - F' + z psi(F) F' = 0,  F(0) = 0,  F'(z)/z -> lambda,
// stored as F, F' and E(z) = int_0^z psi(F).
struct LimitCurve {
  std::vector<double> z;
  std::vector<double> F;
  std::vector<double> Fp;
  std::vector<double> E;
  std::vector<double> psiF;  // psi(F(z)) = E'(z)
  double lambda = 0.0;
  std::string spec_id;
  double z_max = 0.0;
  TailModel tail;
  double F_inf = 0.0;  // F(z_max) + tail mass
  std::optional<ValidationReport> validation;

  // F and F' at any z >= 0 (Hermite interpolation inside the grid, tail
  // model beyond it).
  double eval(double x) const;
  double eval_derivative(double x) const;
};

struct SolveOptions {
  double tol = 1e-6;              // |F(inf) - 1| at the returned lambda
  std::optional<double> z_max;    // default depends on psi(1)
  std::size_t steps = 11000;      // 1/11 uniform on [0,1], rest geometric
  double lambda_lo = 0.5;         // initial bracket, expanded as needed
  double lambda_hi = 2.0;
};

// 0 = z_0 < ... < z_steps = z_max: uniform on [0,1] for steps/11 intervals,
// geometric beyond 1.
std::vector<double> graded_grid(double z_max, std::size_t steps);

double default_z_max(const PsiSpec& spec);

LimitCurve integrate_given_lambda(const PsiSpec& spec, double lambda, double z_max,
                                  std::size_t steps);

LimitCurve solve_f(const PsiSpec& spec, const SolveOptions& opts = {});

ValidationReport validate_curve(const LimitCurve& curve, const PsiSpec& spec);

// "# key value" metadata lines followed by "z,F,Fp" rows.
void write_curve_csv(std::ostream& os, const LimitCurve& curve, const PsiSpec& spec);

}  // namespace psiproc
