#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "psiproc/error.hpp"
#include "psiproc/interval_set.hpp"
#include "stats_util.hpp"

using namespace psiproc;

namespace {

std::vector<double> lengths_in_order(const IntervalSet& s) {
  std::vector<double> out;
  s.for_each_in_order([&](IntervalSet::Id, const Interval& iv) { out.push_back(iv.length); });
  return out;
}

IntervalSet random_set(std::size_t inserts, unsigned seed, std::optional<double> alpha = {}) {
  std::vector<double> init;
  if (alpha) init.push_back(*alpha);
  IntervalSet s(init, alpha);
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  while (s.n_points() < inserts + init.size()) {
    const double x = U(g);
    if (x > 0.0) s.insert_point(x);
  }
  return s;
}

}  // namespace

TEST(IntervalSetInsert, SplitsContainingInterval) {
  IntervalSet s;
  const auto split = s.insert_point(0.3);
  EXPECT_DOUBLE_EQ(split.old_length, 1.0);
  EXPECT_DOUBLE_EQ(split.left_length, 0.3);
  EXPECT_DOUBLE_EQ(split.right_length, 0.7);
  EXPECT_EQ(lengths_in_order(s), (std::vector<double>{0.3, 0.7}));
  s.insert_point(0.65);
  const auto l = lengths_in_order(s);
  ASSERT_EQ(l.size(), 3u);
  EXPECT_DOUBLE_EQ(l[0], 0.3);
  EXPECT_NEAR(l[1], 0.35, 1e-15);
  EXPECT_NEAR(l[2], 0.35, 1e-15);
  EXPECT_EQ(s.n_points(), 2u);
}

TEST(IntervalSetInsert, Errors) {
  IntervalSet s;
  s.insert_point(0.3);
  EXPECT_THROW(s.insert_point(0.3), DuplicatePointError);
  EXPECT_THROW(s.insert_point(0.0), DomainError);
  EXPECT_THROW(s.insert_point(1.0), DomainError);
  EXPECT_THROW(s.insert_point(-0.1), DomainError);
  try {
    s.insert_point(0.3);
  } catch (const DuplicatePointError& e) {
    EXPECT_EQ(e.point, 0.3);
  }
}

TEST(IntervalSetInsert, SplitIntervalFastPathValidates) {
  IntervalSet s;
  s.insert_point(0.3);
  const auto id = s.locate(0.5);
  EXPECT_THROW(s.split_interval(id, 0.2), DomainError);
  EXPECT_THROW(s.split_interval(id, 0.3), DuplicatePointError);
  s.split_interval(id, 0.5);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_TRUE(s.audit().ok());
}

TEST(IntervalSetInsert, AlphaCounting) {
  const std::vector<double> init{0.5};
  IntervalSet s(init, 0.5);
  EXPECT_EQ(s.n_points_alpha(), 0u);
  s.insert_point(0.2);
  s.insert_point(0.7);
  s.insert_point(0.1);
  EXPECT_EQ(s.n_points_alpha(), 2u);
  EXPECT_EQ(s.n_points(), 4u);
  EXPECT_EQ(s.count(SideQuery::kLeft), 3u);
  EXPECT_EQ(s.count(SideQuery::kRight), 2u);
}

TEST(IntervalSetConstruct, AlphaMustBeAnInitialPoint) {
  const std::vector<double> init{0.3};
  EXPECT_THROW(IntervalSet(init, 0.5), ArgumentError);
  EXPECT_THROW(IntervalSet(init, 1.0), DomainError);
  const std::vector<double> with_alpha{0.8, 0.5, 0.2};
  IntervalSet s(with_alpha, 0.5);
  s.for_each_in_order([&](IntervalSet::Id, const Interval& iv) {
    EXPECT_EQ(iv.side, iv.left < 0.5 ? Side::kLeftOfAlpha : Side::kRightOfAlpha);
  });
}

TEST(SizeBiasedQuantile, Examples) {
  IntervalSet s;
  s.insert_point(0.3);
  EXPECT_DOUBLE_EQ(s.interval(s.size_biased_quantile(0.2)).length, 0.3);
  EXPECT_DOUBLE_EQ(s.interval(s.size_biased_quantile(0.5)).length, 0.7);
  EXPECT_DOUBLE_EQ(s.interval(s.size_biased_quantile(1.0)).length, 0.7);
  EXPECT_THROW(s.size_biased_quantile(0.0), DomainError);
  EXPECT_THROW(s.size_biased_quantile(1.1), DomainError);
}

TEST(SizeBiasedQuantile, AdjointToDistributionFunction) {
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (unsigned seed = 0; seed < 5; ++seed) {
    const IntervalSet s = random_set(500, seed);
    std::vector<double> lens = lengths_in_order(s);
    std::sort(lens.begin(), lens.end());
    for (int q = 0; q < 500; ++q) {
      const double u = std::max(U(g), 1e-12);
      const double len = s.interval(s.size_biased_quantile(u)).length;
      const auto it = std::lower_bound(lens.begin(), lens.end(), len);
      const double below = it == lens.begin() ? 0.0 : *(it - 1);
      const double eps = 0.5 * (len - below);
      EXPECT_LT(s.sbd_eval(len - eps), u + 1e-12);
      EXPECT_LE(u, s.sbd_eval(len) + 1e-12);
    }
  }
}

TEST(SizeBiasedQuantile, DrawsFollowLengths) {
  // Ten intervals with distinct lengths.
  std::vector<double> pts;
  double x = 0.0;
  for (int i = 1; i < 10; ++i) {
    x += i / 55.0;
    pts.push_back(x);
  }
  const IntervalSet s(pts);
  std::vector<IntervalSet::Id> ids;
  std::vector<double> probs;
  s.for_each_in_order([&](IntervalSet::Id id, const Interval& iv) {
    ids.push_back(id);
    probs.push_back(iv.length);
  });
  std::vector<std::uint64_t> counts(ids.size(), 0);
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 100000; ++i) {
    const double u = 1.0 - U(g);  // (0,1]
    const auto id = s.size_biased_quantile(u);
    ++counts[static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin())];
  }
  EXPECT_GT(psiproc::testing::chi_square_gof(counts, probs), 1e-3);
}

TEST(SizeBiasedQuantile, TiesAreResolvedUniformly) {
  const std::vector<double> pts{0.25, 0.5, 0.75};
  const IntervalSet s(pts);
  std::vector<std::uint64_t> counts(4, 0);
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 40000; ++i) {
    const auto id = s.size_biased_quantile(0.1, U(g));
    ++counts[static_cast<std::size_t>(s.interval(id).left * 4 + 0.5)];
  }
  EXPECT_GT(psiproc::testing::chi_square_gof(counts, {0.25, 0.25, 0.25, 0.25}), 1e-3);
  // Largest-interval ties too.
  std::vector<std::uint64_t> big(4, 0);
  for (int i = 0; i < 40000; ++i) ++big[static_cast<std::size_t>(s.interval(s.largest_interval(U(g))).left * 4 + 0.5)];
  EXPECT_GT(psiproc::testing::chi_square_gof(big, {0.25, 0.25, 0.25, 0.25}), 1e-3);
}

TEST(SbdEval, Examples) {
  IntervalSet s;
  s.insert_point(0.3);
  EXPECT_DOUBLE_EQ(s.sbd_eval(0.5), 0.3);
  EXPECT_DOUBLE_EQ(s.sbd_eval(0.7), 1.0);
  EXPECT_DOUBLE_EQ(s.sbd_eval(5.0), 1.0);
  EXPECT_DOUBLE_EQ(s.sbd_eval(-1.0), 0.0);
  EXPECT_THROW(s.sbd_eval(1.0, SideQuery::kLeft), StateError);
  const std::vector<double> pts{0.3};
  IntervalSet a(pts, 0.3);
  EXPECT_DOUBLE_EQ(a.sbd_eval(1.0, SideQuery::kLeft), 0.3);
  EXPECT_DOUBLE_EQ(a.sbd_eval(1.0, SideQuery::kRight), 0.7);
}

TEST(SbdEval, LeftPlusRightEqualsAll) {
  const IntervalSet s = random_set(20000, 9, 0.37);
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double x = U(g) * 4e-4;
    EXPECT_NEAR(s.sbd_eval(x, SideQuery::kLeft) + s.sbd_eval(x, SideQuery::kRight), s.sbd_eval(x), 1e-12);
  }
}

TEST(DeltaNorm, Examples) {
  IntervalSet s;
  EXPECT_DOUBLE_EQ(s.delta_norm(1.0), 1.0);
  EXPECT_DOUBLE_EQ(s.delta_norm(0.5), 2.0);
  EXPECT_THROW(s.delta_norm(0.0), DomainError);
  EXPECT_THROW(s.delta_norm(1.5), DomainError);
  const IntervalSet r = random_set(1234, 2);
  EXPECT_DOUBLE_EQ(r.delta_norm(1.0), 1235.0);
}

TEST(DeltaNorm, ClosedFormMatchesDirectSum) {
  const IntervalSet s = random_set(300, 4, 0.6);
  for (double d : {0.25, 0.5, 0.9}) {
    double all = 0.0, left = 0.0;
    s.for_each_in_order([&](IntervalSet::Id, const Interval& iv) {
      all += std::pow(iv.length, 1.0 - d);
      if (iv.side == Side::kLeftOfAlpha) left += std::pow(iv.length, 1.0 - d);
    });
    EXPECT_NEAR(s.delta_norm(d), all / d, 1e-10 * all / d);
    EXPECT_NEAR(s.delta_norm(d, SideQuery::kLeft), left / d, 1e-10 * all / d);
  }
}

TEST(DeltaNorm, UnitExponentCountsIntervalsAfterEveryOperation) {
  std::vector<double> init{0.4};
  IntervalSet s(init, 0.4);
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    s.insert_point(U(g));
    ASSERT_EQ(s.delta_norm(1.0), static_cast<double>(s.size()));
    ASSERT_EQ(s.delta_norm(1.0, SideQuery::kLeft), static_cast<double>(s.n_points_alpha() + 1));
  }
}

TEST(Gaps, Examples) {
  IntervalSet s;
  EXPECT_EQ(s.largest_gap(), 1.0);
  EXPECT_EQ(s.smallest_gap(), 1.0);
  s.insert_point(0.3);
  EXPECT_DOUBLE_EQ(s.largest_gap(), 0.7);
  EXPECT_DOUBLE_EQ(s.smallest_gap(), 0.3);
  s.insert_point(0.65);
  EXPECT_NEAR(s.largest_gap(), 0.35, 1e-15);
}

TEST(Audit, FreshRandomAndCorrupted) {
  IntervalSet fresh;
  const auto a = fresh.audit();
  EXPECT_EQ(a.max_discrepancy(), 0.0);
  EXPECT_TRUE(a.counts_ok);
  IntervalSet s = random_set(10000, 12, 0.5);
  EXPECT_LE(s.audit().sum_error, 1e-9);
  EXPECT_TRUE(s.audit().ok(1e-9));
  s.corrupt_index_for_testing(1e-6);
  EXPECT_FALSE(s.audit().ok(1e-9));
}

TEST(Snapshot, CsvFormat) {
  std::vector<double> init{0.5};
  IntervalSet s(init, 0.5);
  s.insert_point(0.1);
  std::ostringstream os;
  s.write_csv(os);
  EXPECT_EQ(os.str(),
            "left,length,side_tag\n"
            "0,0.10000000000000001,LEFT_OF_ALPHA\n"
            "0.10000000000000001,0.40000000000000002,LEFT_OF_ALPHA\n"
            "0.5,0.5,RIGHT_OF_ALPHA\n");
}
