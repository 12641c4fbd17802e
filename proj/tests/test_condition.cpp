#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "psiproc/condition.hpp"
#include "psiproc/error.hpp"

using namespace psiproc;

namespace {

const LemmaCheck* find_check(const ConditionReport& r, const std::string& name) {
  for (const auto& c : r.lemma_checks)
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST(ConditionRatio, UniformIsIdenticallyOne) {
  const auto spec = PsiSpec::uniform();
  const auto r = check_condition(spec);
  for (double v : r.ratio) ASSERT_DOUBLE_EQ(v, 1.0);
  EXPECT_NEAR(r.delta_max, 1.0, 1e-6);
  EXPECT_EQ(r.delta, 1.0);
  EXPECT_EQ(r.verdict, Verdict::kPass);
}

TEST(ConditionRatio, SmallZLimits) {
  EXPECT_EQ(condition_ratio_limit_zero(PsiSpec::uniform()), 1.0);
  EXPECT_EQ(condition_ratio_limit_zero(PsiSpec::max_k(2)), 1.0);
  EXPECT_EQ(condition_ratio_limit_zero(PsiSpec::max_k(3)), 3.0);
  EXPECT_EQ(condition_ratio_limit_zero(PsiSpec::max_k(4)), 5.0);
  EXPECT_EQ(condition_ratio_limit_zero(PsiSpec::min_k(2)), 1.0);
  const auto spec = PsiSpec::max_k(3);
  const auto curve = solve_f(spec);
  EXPECT_EQ(condition_ratio(curve, spec, 1e-7), 3.0);
  // The grid value just above the threshold approaches the limit.
  EXPECT_NEAR(condition_ratio(curve, spec, 1e-3), 3.0, 0.05);
}

TEST(ConditionRatio, SingularityAwayFromLimitBranch) {
  const auto spec = PsiSpec::max_k(2);
  const auto curve = solve_f(spec);
  EXPECT_THROW(condition_ratio(curve, spec, 0.0, 0.0), SingularityError);
}

TEST(CheckCondition, ReproducesKnownVerdicts) {
  const auto max2 = check_condition(PsiSpec::max_k(2));
  EXPECT_EQ(max2.verdict, Verdict::kPass);
  EXPECT_LE(max2.R_star, 1.0 + 1e-3);

  const auto mix = check_condition(PsiSpec::two_term(0.6));
  EXPECT_EQ(mix.verdict, Verdict::kPass);
  EXPECT_GE(mix.delta_max, 1e-3);
  EXPECT_NEAR(mix.R_star, 1.20775, 1e-4);

  const auto cp = check_condition(PsiSpec::preset("cp-half"));
  EXPECT_EQ(cp.verdict, Verdict::kPass);

  const auto max3 = check_condition(PsiSpec::max_k(3));
  EXPECT_EQ(max3.verdict, Verdict::kFail);
  EXPECT_NEAR(max3.R_zero, 3.0, 0.05);
  EXPECT_LE(max3.delta_max, -1e-3);
}

TEST(CheckCondition, PureMinTwoIsInconclusive) {
  const auto r = check_condition(PsiSpec::min_k(2));
  EXPECT_FALSE(r.R_infinity);
  EXPECT_EQ(r.verdict, Verdict::kInconclusive);
}

TEST(CheckCondition, VerdictFollowsThresholds) {
  for (const char* p : {"uniform", "max2", "max3", "mix-60-40", "cp-half"}) {
    const auto r = check_condition(PsiSpec::preset(p));
    for (double v : r.ratio) ASSERT_GE(v, 0.0);
    EXPECT_DOUBLE_EQ(r.delta_max, 2.0 - r.R_star);
    EXPECT_EQ(r.delta, std::min(r.delta_max, 1.0));
    if (r.delta_max >= 1e-3) EXPECT_EQ(r.verdict, Verdict::kPass) << p;
    if (r.delta_max <= -1e-3) EXPECT_EQ(r.verdict, Verdict::kFail) << p;
    ASSERT_TRUE(r.R_infinity);
    EXPECT_EQ(*r.R_infinity, 1.0);
  }
}

TEST(CheckCondition, Deterministic) {
  const auto a = check_condition(PsiSpec::two_term(0.6));
  const auto b = check_condition(PsiSpec::two_term(0.6));
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(CheckCondition, InvariantUnderGridRefinement) {
  const auto spec = PsiSpec::two_term(0.6);
  ConditionOptions fine;
  fine.solve.steps = 22000;
  const auto coarse_curve = solve_f(spec);
  const auto fine_curve = solve_f(spec, fine.solve);
  for (double z = 1e-4; z < 30.0; z *= 1.25)
    EXPECT_NEAR(condition_ratio(coarse_curve, spec, z), condition_ratio(fine_curve, spec, z), 1e-4) << z;
  EXPECT_NEAR(check_condition(spec).R_star, check_condition(spec, fine).R_star, 1e-4);
}

TEST(LemmaBounds, TwoTermSixtyForty) {
  const auto r = check_condition(PsiSpec::two_term(0.6));
  for (const auto& c : r.lemma_checks) EXPECT_TRUE(c.holds) << c.name;
  const auto* fp = find_check(r, "sup_Fp_le_1");
  ASSERT_NE(fp, nullptr);
  EXPECT_EQ(fp->bound, 1.0);
  const auto* lam = find_check(r, "lambda_le_2");
  ASSERT_NE(lam, nullptr);
  EXPECT_NEAR(lam->observed, 1.1045900558, 1e-6);
  const auto* zfp = find_check(r, "sup_zFp_le_2_over_p2e_squared");
  ASSERT_NE(zfp, nullptr);
  EXPECT_NEAR(zfp->bound, 2.0 / std::pow(0.4 * std::exp(1.0), 2), 1e-12);
  EXPECT_LE(zfp->observed, 1.6915 + 1e-3);
}

TEST(LemmaBounds, UniformWeightBound) {
  const auto spec = PsiSpec::preset("cp-half");
  const auto r = check_lemma_bounds(spec, solve_f(spec));
  const LemmaCheck* zfp = nullptr;
  for (const auto& c : r)
    if (c.name == "sup_zFp_le_2_over_e_p1_squared") zfp = &c;
  ASSERT_NE(zfp, nullptr);
  EXPECT_NEAR(zfp->bound, 1.3081, 1e-4);
  EXPECT_TRUE(zfp->holds);
  for (const auto& c : r)
    EXPECT_NE(c.name, "lambda_le_2");
}

TEST(LemmaBounds, SupDerivativeAtMostOneEverywhere) {
  for (const char* p : {"uniform", "max2", "max3", "min2", "mix-60-40", "cp-half"}) {
    const auto spec = PsiSpec::preset(p);
    const auto checks = check_lemma_bounds(spec, solve_f(spec));
    ASSERT_FALSE(checks.empty());
    EXPECT_EQ(checks.front().name, "sup_Fp_le_1");
    EXPECT_TRUE(checks.front().holds) << p;
  }
}

TEST(Pinch, Thresholds) {
  const auto t = pinch_thresholds();
  EXPECT_LE(std::abs(t.cubic_residual), 1e-9);
  EXPECT_NEAR(t.cubic_root, 0.6097709966, 1e-9);
  EXPECT_EQ(std::round(t.cubic_root * 100) / 100, 0.61);
  EXPECT_DOUBLE_EQ(t.exp_third, std::exp(-1.0 / 3.0));
}

TEST(Scan, TwoTermFamily) {
  std::vector<double> params;
  for (int i = 0; i <= 6; ++i) params.push_back(i / 10.0);
  const auto scan = scan_family("two-term", named_family("two-term"), params);
  ASSERT_EQ(scan.rows.size(), params.size());
  for (const auto& row : scan.rows) {
    EXPECT_TRUE(row.error.empty());
    EXPECT_EQ(row.verdict, Verdict::kPass) << row.param;
  }
  EXPECT_FALSE(scan.boundary_first_other);
  const auto standalone = check_condition(PsiSpec::max_k(2));
  EXPECT_EQ(scan.rows.front().R_star, standalone.R_star);
  EXPECT_EQ(scan.rows.front().spec_id, standalone.spec_id);
}

TEST(Scan, BoundaryAndWorkerIndependence) {
  const std::vector<double> params{0.8, 0.9, 1.0};
  const auto one = scan_family("two-term", named_family("two-term"), params, {}, 1);
  const auto two = scan_family("two-term", named_family("two-term"), params, {}, 2);
  ASSERT_TRUE(one.boundary_last_pass);
  ASSERT_TRUE(one.boundary_first_other);
  EXPECT_EQ(*one.boundary_last_pass, 0.9);
  EXPECT_EQ(*one.boundary_first_other, 1.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_EQ(one.rows[i].R_star, two.rows[i].R_star);
    EXPECT_EQ(one.rows[i].verdict, two.rows[i].verdict);
  }
}

TEST(Scan, RowErrorsAreRecorded) {
  const SpecFamily bad = [](double p) {
    if (p > 0.5) throw ArgumentError("bad parameter");
    return PsiSpec::uniform();
  };
  const auto scan = scan_family("custom", bad, {0.0, 1.0});
  ASSERT_EQ(scan.rows.size(), 2u);
  EXPECT_TRUE(scan.rows[0].error.empty());
  EXPECT_FALSE(scan.rows[1].error.empty());
  EXPECT_THROW(named_family("nope"), ArgumentError);
}

TEST(Report, JsonShape) {
  const auto j = check_condition(PsiSpec::max_k(3)).to_json();
  for (const char* key : {"spec", "lambda", "R_star", "argmax_z", "delta_max", "verdict", "lemma_checks", "residuals"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["verdict"], "FAIL");
}
