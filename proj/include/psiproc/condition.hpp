#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "psiproc/limit_solver.hpp"
#include "psiproc/psi_model.hpp"

namespace psiproc {

enum class Verdict { kPass, kFail, kInconclusive };
const char* verdict_name(Verdict v);

struct LemmaCheck {
  std::string name;
  double bound;
  double observed;
  bool holds;
};

struct ConditionOptions {
  double delta_floor = 1e-3;
  double margin = 1e-3;
  double small_z = 1e-6;        // below this the analytic z -> 0 limit is used
  int refine_points = 64;       // log-spaced extra points near 0 and in the tail
  SolveOptions solve;
};

// Ratio R(z) = |z psi'(F) F' - psi(F)| / psi(F) of the sufficient
// equidistribution condition R <= 2 - delta, over the solved curve.
struct ConditionReport {
  std::string spec_id;
  nlohmann::json spec;
  double lambda = 0.0;
  std::vector<double> z;
  std::vector<double> ratio;
  double R_zero = 0.0;                  // z -> 0 limit
  std::optional<double> R_infinity;     // z -> inf limit (psi(1) > 0 only)
  double R_star = 0.0;
  double argmax_z = 0.0;
  double delta_max = 0.0;               // 2 - R_star
  double delta = 0.0;                   // min(delta_max, 1), the usable exponent
  Verdict verdict = Verdict::kInconclusive;
  std::vector<LemmaCheck> lemma_checks;
  std::optional<ValidationReport> residuals;

  nlohmann::json to_json() const;
};

// Analytic small-z limit of R: 1 when psi(0) > 0, else 2k - 3 with k the
// smallest max-k order carrying weight.
double condition_ratio_limit_zero(const PsiSpec& spec);

double condition_ratio(const LimitCurve& curve, const PsiSpec& spec, double z,
                       double small_z = 1e-6);

ConditionReport check_condition(const PsiSpec& spec, const ConditionOptions& opts = {});
ConditionReport check_condition(const PsiSpec& spec, const LimitCurve& curve,
                                const ConditionOptions& opts = {});

std::vector<LemmaCheck> check_lemma_bounds(const PsiSpec& spec, const LimitCurve& curve);

struct PinchThresholds {
  double cubic_root;  // root of (2/e^2)(2p - 1) = (1 - p)^3 on [1/2, 1]
  double exp_third;   // e^{-1/3}
  double cubic_residual;
};
PinchThresholds pinch_thresholds();

struct ScanRow {
  double param = 0.0;
  std::string spec_id;
  double R_star = 0.0;
  double delta_max = 0.0;
  Verdict verdict = Verdict::kInconclusive;
  std::string error;  // non-empty when the row failed to solve
};

struct ScanResult {
  std::string family;
  std::vector<ScanRow> rows;
  // Last PASS parameter before the first non-PASS row, and that row's parameter.
  std::optional<double> boundary_last_pass;
  std::optional<double> boundary_first_other;
};

using SpecFamily = std::function<PsiSpec(double)>;

// Named families: "two-term" (param = p_{-2}), "uniform-min-k" and
// "uniform-max-k" (param = weight on the k term, rest uniform).
SpecFamily named_family(const std::string& name, int k = 2);

ScanResult scan_family(const std::string& family_name, const SpecFamily& family,
                       const std::vector<double>& params, const ConditionOptions& opts = {},
                       int workers = 1);

}  // namespace psiproc
