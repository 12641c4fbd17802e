#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "psiproc/condition.hpp"
#include "psiproc/error.hpp"
#include "psiproc/kernels.hpp"
#include "psiproc/limit_solver.hpp"
#include "psiproc/psi_model.hpp"

using namespace psiproc;
namespace k = psiproc::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(g);
  return v;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 9, 16, 17, 31, 1000, 1003};

class IsaGuard {
 public:
  IsaGuard() : saved_(k::active_isa()) {}
  ~IsaGuard() { k::force_isa(saved_); }

 private:
  k::Isa saved_;
};

}  // namespace

TEST(KernelDispatch, ScalarAlwaysAvailable) {
  EXPECT_TRUE(k::isa_available(k::Isa::kScalar));
  EXPECT_EQ(k::isa_name(k::Isa::kScalar), "scalar");
  EXPECT_EQ(k::isa_name(k::Isa::kAvx2), "avx2");
}

TEST(KernelDispatch, ForceIsaSwitchesAndRejectsMissing) {
  IsaGuard guard;
  k::force_isa(k::Isa::kScalar);
  EXPECT_EQ(k::active_isa(), k::Isa::kScalar);
  if (k::isa_available(k::Isa::kAvx2)) {
    k::force_isa(k::Isa::kAvx2);
    EXPECT_EQ(k::active_isa(), k::Isa::kAvx2);
  } else {
    EXPECT_THROW(k::force_isa(k::Isa::kAvx2), DomainError);
  }
}

#if defined(PSIPROC_HAVE_AVX2_KERNELS)

class Avx2Equivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    if (!k::isa_available(k::Isa::kAvx2)) GTEST_SKIP() << "AVX2 not available on this CPU";
  }
};

TEST_F(Avx2Equivalence, PsiEvalIsBitIdentical) {
  const std::vector<PsiSpec> specs = {PsiSpec::uniform(), PsiSpec::max_k(3), PsiSpec::two_term(0.6),
                                      PsiSpec::preset("geometric-min"),
                                      PsiSpec({{1, 0.1}, {7, 0.3}, {-5, 0.6}})};
  for (const auto& spec : specs) {
    const k::PsiCoefs c{spec.coef_pos(), spec.coef_neg()};
    for (std::size_t n : kSizes) {
      auto u = random_vec(n, 0.0, 1.0, static_cast<unsigned>(n) + 11);
      if (n > 2) {
        u[0] = 0.0;
        u[1] = 1.0;
      }
      std::vector<double> a(n * 3), b(n * 3);
      k::scalar::psi_eval(c, u, a.data(), a.data() + n, a.data() + 2 * n);
      k::avx2::psi_eval(c, u, b.data(), b.data() + n, b.data() + 2 * n);
      for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]) << spec.id() << " n=" << n << " i=" << i;
    }
  }
}

TEST_F(Avx2Equivalence, PsiEvalSkipsNullOutputs) {
  const PsiSpec spec = PsiSpec::two_term(0.6);
  const k::PsiCoefs c{spec.coef_pos(), spec.coef_neg()};
  const auto u = random_vec(13, 0.0, 1.0, 5);
  std::vector<double> a(13), b(13);
  k::scalar::psi_eval(c, u, nullptr, a.data(), nullptr);
  k::avx2::psi_eval(c, u, nullptr, b.data(), nullptr);
  EXPECT_EQ(a, b);
}

TEST_F(Avx2Equivalence, ConditionRatioIsBitIdentical) {
  for (std::size_t n : kSizes) {
    const auto z = random_vec(n, 0.0, 50.0, 1);
    const auto fp = random_vec(n, 0.0, 1.0, 2);
    const auto psi = random_vec(n, 0.01, 2.0, 3);
    const auto dpsi = random_vec(n, -2.0, 2.0, 4);
    std::vector<double> a(n), b(n);
    k::scalar::condition_ratio(z, fp, psi, dpsi, a.data());
    k::avx2::condition_ratio(z, fp, psi, dpsi, b.data());
    EXPECT_EQ(a, b) << "n=" << n;
  }
}

TEST_F(Avx2Equivalence, ReductionsAgreeToRounding) {
  for (std::size_t n : kSizes) {
    const auto w = random_vec(n, 0.0, 3.0, 7);
    const auto a = random_vec(n, 0.0, 1.0, 8);
    const auto b = random_vec(n, 0.0, 1.0, 9);
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += w[i] * (a[i] + 0.7 * b[i]);
    EXPECT_NEAR(k::scalar::weighted_abs_diff(w, a, b, 0.7), k::avx2::weighted_abs_diff(w, a, b, 0.7),
                1e-14 * std::max(mag, 1.0))
        << "n=" << n;
    EXPECT_NEAR(k::scalar::weighted_sum(w, a), k::avx2::weighted_sum(w, a), 1e-14 * std::max(mag, 1.0)) << "n=" << n;
  }
}

TEST_F(Avx2Equivalence, SolverAndCheckerAgreeAcrossIsas) {
  IsaGuard guard;
  const PsiSpec spec = PsiSpec::two_term(0.6);
  k::force_isa(k::Isa::kScalar);
  const auto cs = solve_f(spec);
  const auto rs = check_condition(spec, cs);
  k::force_isa(k::Isa::kAvx2);
  const auto cv = solve_f(spec);
  const auto rv = check_condition(spec, cv);
  EXPECT_NEAR(cs.lambda, cv.lambda, 1e-13);
  EXPECT_NEAR(cs.validation->norm_value, cv.validation->norm_value, 1e-13);
  EXPECT_NEAR(rs.R_star, rv.R_star, 1e-13);
  EXPECT_EQ(rs.verdict, rv.verdict);
}

#endif

TEST(ScalarKernels, ReferenceValues) {
  const std::vector<double> w = {1.0, 2.0, 0.5};
  const std::vector<double> a = {0.5, 0.25, 1.0};
  const std::vector<double> b = {1.0, 0.5, 1.0};
  EXPECT_DOUBLE_EQ(k::scalar::weighted_sum(w, a), 0.5 + 0.5 + 0.5);
  // |0.5 - 0.5| + 2|0.25 - 0.25| + 0.5|1 - 0.5|
  EXPECT_DOUBLE_EQ(k::scalar::weighted_abs_diff(w, a, b, 0.5), 0.25);
  std::vector<double> out(1);
  const std::vector<double> z = {2.0}, fp = {0.25}, psi = {1.0}, dpsi = {3.0};
  k::scalar::condition_ratio(z, fp, psi, dpsi, out.data());
  EXPECT_DOUBLE_EQ(out[0], 0.5);
}
