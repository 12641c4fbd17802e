#include "psiproc/condition.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <future>
#include <limits>
#include <numbers>

#include "psiproc/error.hpp"
#include "psiproc/kernels.hpp"

namespace psiproc {

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kPass:
      return "PASS";
    case Verdict::kFail:
      return "FAIL";
    case Verdict::kInconclusive:
      break;
  }
  return "INCONCLUSIVE";
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : lemma_checks)
    checks.push_back({{"name", c.name}, {"bound", c.bound}, {"observed", c.observed}, {"holds", c.holds}});
  nlohmann::json j = {{"spec", spec},
                      {"spec_id", spec_id},
                      {"lambda", lambda},
                      {"R_star", R_star},
                      {"R_zero", R_zero},
                      {"argmax_z", argmax_z},
                      {"delta_max", delta_max},
                      {"delta", delta},
                      {"verdict", verdict_name(verdict)},
                      {"lemma_checks", checks},
                      {"residuals", residuals ? residuals->to_json() : nlohmann::json(nullptr)}};
  j["R_infinity"] = R_infinity ? nlohmann::json(*R_infinity) : nlohmann::json(nullptr);
  return j;
}

double condition_ratio_limit_zero(const PsiSpec& spec) {
  if (spec.eval(0.0).psi > 0.0) return 1.0;
  return 2.0 * spec.leading_max_order() - 3.0;
}

double condition_ratio(const LimitCurve& curve, const PsiSpec& spec, double z, double small_z) {
  if (!(z >= 0.0)) throw DomainError("z must be nonnegative");
  if (z < small_z) return condition_ratio_limit_zero(spec);
  const double F = std::clamp(curve.eval(z), 0.0, 1.0);
  const double Fp = curve.eval_derivative(z);
  const PsiValue v = spec.eval(F);
  if (!(v.psi > 0.0)) throw SingularityError(fmt::format("psi(F(z)) vanishes at z = {}", z), z);
  return std::fabs(z * v.dpsi * Fp - v.psi) / v.psi;
}

namespace {

void log_spaced(double a, double b, int n, std::vector<double>& out) {
  for (int i = 0; i < n; ++i) out.push_back(a * std::pow(b / a, static_cast<double>(i) / (n - 1)));
}

}  // namespace

ConditionReport check_condition(const PsiSpec& spec, const ConditionOptions& opts) {
  return check_condition(spec, solve_f(spec, opts.solve), opts);
}

ConditionReport check_condition(const PsiSpec& spec, const LimitCurve& curve, const ConditionOptions& opts) {
  ConditionReport r;
  r.spec_id = spec.id();
  r.spec = spec.to_json();
  r.lambda = curve.lambda;
  r.residuals = curve.validation;

  // Grid points above the small-z threshold, plus log-spaced refinements
  // between the threshold and the first grid point and past z_max.
  std::vector<double> zs, F, Fp;
  std::vector<double> extra;
  const double first = *std::upper_bound(curve.z.begin(), curve.z.end(), opts.small_z);
  log_spaced(opts.small_z, first, opts.refine_points, extra);
  for (double z : extra) {
    if (z >= first) continue;
    zs.push_back(z);
    F.push_back(curve.eval(z));
    Fp.push_back(curve.eval_derivative(z));
  }
  for (std::size_t i = 0; i < curve.z.size(); ++i) {
    if (curve.z[i] < opts.small_z) continue;
    zs.push_back(curve.z[i]);
    F.push_back(curve.F[i]);
    Fp.push_back(curve.Fp[i]);
  }
  extra.clear();
  log_spaced(curve.z_max, 10.0 * curve.z_max, opts.refine_points, extra);
  for (std::size_t i = 1; i < extra.size(); ++i) {
    zs.push_back(extra[i]);
    F.push_back(curve.eval(extra[i]));
    Fp.push_back(curve.eval_derivative(extra[i]));
  }

  const std::size_t n = zs.size();
  for (double& f : F) f = std::clamp(f, 0.0, 1.0);
  std::vector<double> psi(n), dpsi(n), ratio(n);
  eval_batch(spec, F, {}, psi, dpsi);

  // psi(F) may vanish numerically deep in a min-k tail; those points carry no
  // information and are dropped. Elsewhere a zero is a genuine singularity.
  std::vector<double> kz, kF, kFp, kpsi, kdpsi;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(psi[i] > 0.0)) {
      if (zs[i] > curve.z_max || F[i] >= 1.0) continue;
      throw SingularityError(fmt::format("psi(F(z)) vanishes at z = {}", zs[i]), zs[i]);
    }
    kz.push_back(zs[i]);
    kFp.push_back(Fp[i]);
    kpsi.push_back(psi[i]);
    kdpsi.push_back(dpsi[i]);
  }
  ratio.resize(kz.size());
  kernels::condition_ratio(kz, kFp, kpsi, kdpsi, ratio.data());
  r.z = std::move(kz);
  r.ratio = std::move(ratio);

  r.R_zero = condition_ratio_limit_zero(spec);
  r.R_star = r.R_zero;
  r.argmax_z = 0.0;
  for (std::size_t i = 0; i < r.z.size(); ++i) {
    if (r.ratio[i] > r.R_star) {
      r.R_star = r.ratio[i];
      r.argmax_z = r.z[i];
    }
  }
  const bool tail_known = spec.eval(1.0).psi > 0.0;
  if (tail_known) {
    r.R_infinity = 1.0;
    if (*r.R_infinity > r.R_star) {
      r.R_star = *r.R_infinity;
      r.argmax_z = std::numeric_limits<double>::infinity();
    }
  }
  r.delta_max = 2.0 - r.R_star;
  r.delta = std::min(r.delta_max, 1.0);
  if (r.delta_max <= -opts.margin)
    r.verdict = Verdict::kFail;
  else if (r.delta_max >= opts.delta_floor && tail_known)
    r.verdict = Verdict::kPass;
  else
    r.verdict = Verdict::kInconclusive;
  r.lemma_checks = check_lemma_bounds(spec, curve);
  return r;
}

std::vector<LemmaCheck> check_lemma_bounds(const PsiSpec& spec, const LimitCurve& curve) {
  const ValidationReport v = curve.validation ? *curve.validation : validate_curve(curve, spec);
  constexpr double kSlack = 1e-6;
  std::vector<LemmaCheck> out;
  auto add = [&](std::string name, double bound, double observed) {
    out.push_back({std::move(name), bound, observed, observed <= bound + kSlack});
  };

  add("sup_Fp_le_1", 1.0, v.sup_Fp);

  const auto cp = spec.c_p_report();
  add("sup_abs_dpsi_le_cp", cp.c_p, cp.sup_abs_dpsi);

  // Two-term min-2/max-2 mixtures tilted towards min-2.
  const bool two_term = std::all_of(spec.weights().begin(), spec.weights().end(),
                                    [](const auto& kv) { return kv.first == 2 || kv.first == -2; });
  const double p2 = spec.weight(2), pm2 = spec.weight(-2);
  if (two_term && pm2 > p2) {
    add("lambda_le_2", 2.0, curve.lambda);
    const double bound = p2 > 0.0 ? 2.0 / std::pow(p2 * std::numbers::e, 2) : std::numeric_limits<double>::infinity();
    add("sup_zFp_le_2_over_p2e_squared", bound, v.sup_zFp);
  }

  const double p1 = spec.weight(1);
  if (p1 > 0.0) add("sup_zFp_le_2_over_e_p1_squared", 2.0 / std::numbers::e / (p1 * p1), v.sup_zFp);
  return out;
}

PinchThresholds pinch_thresholds() {
  const double k = 2.0 / (std::numbers::e * std::numbers::e);
  auto f = [k](double p) { return k * (2.0 * p - 1.0) - std::pow(1.0 - p, 3); };
  double lo = 0.5, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  const double root = 0.5 * (lo + hi);
  return {root, std::exp(-1.0 / 3.0), std::fabs(f(root))};
}

SpecFamily named_family(const std::string& name, int k) {
  if (name == "two-term") return [](double p) { return PsiSpec::two_term(p); };
  if (k < 2 || k > PsiSpec::kMaxOrder) throw ArgumentError("family order k must lie in [2, 64]");
  if (name == "uniform-min-k")
    return [k](double p) { return PsiSpec(p == 0.0 ? std::map<int, double>{{1, 1.0}}
                                                    : std::map<int, double>{{1, 1.0 - p}, {-k, p}}); };
  if (name == "uniform-max-k")
    return [k](double p) { return PsiSpec(p == 0.0 ? std::map<int, double>{{1, 1.0}}
                                                    : std::map<int, double>{{1, 1.0 - p}, {k, p}}); };
  throw ArgumentError("unknown family '" + name + "'");
}

ScanResult scan_family(const std::string& family_name, const SpecFamily& family,
                       const std::vector<double>& params, const ConditionOptions& opts, int workers) {
  ScanResult result;
  result.family = family_name;
  result.rows.resize(params.size());
  auto run_row = [&](std::size_t i) {
    ScanRow& row = result.rows[i];
    row.param = params[i];
    try {
      const PsiSpec spec = family(params[i]);
      row.spec_id = spec.id();
      const ConditionReport rep = check_condition(spec, opts);
      row.R_star = rep.R_star;
      row.delta_max = rep.delta_max;
      row.verdict = rep.verdict;
    } catch (const std::exception& e) {
      row.error = e.what();
      row.R_star = row.delta_max = std::numeric_limits<double>::quiet_NaN();
      row.verdict = Verdict::kInconclusive;
    }
  };
  const std::size_t nw = static_cast<std::size_t>(std::max(1, workers));
  if (nw == 1) {
    for (std::size_t i = 0; i < params.size(); ++i) run_row(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < nw; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < params.size(); i += nw) run_row(i);
      }));
    for (auto& j : jobs) j.get();
  }
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    if (result.rows[i].verdict != Verdict::kPass) {
      if (i > 0) {
        result.boundary_last_pass = result.rows[i - 1].param;
        result.boundary_first_other = result.rows[i].param;
      }
      break;
    }
  }
  return result;
}

}  // namespace psiproc
