#include <gtest/gtest.h>

#include "ags/stats.hpp"

using namespace ags;

TEST(Stats, MeanStdAndError) {
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(mean(v), 2.5);
  EXPECT_DOUBLE_EQ(stddev(v), std::sqrt(5.0 / 3.0));
  EXPECT_DOUBLE_EQ(std_error(v), std::sqrt(5.0 / 3.0) / 2.0);
  EXPECT_EQ(stddev(std::vector<double>{7}), 0.0);
  EXPECT_EQ(mean(std::vector<double>{}), 0.0);
}

// Reference values from scipy.stats.ttest_rel(a, b, alternative="greater").
TEST(Stats, PairedTestMatchesReference) {
  const std::vector<double> a{3, 5, 4, 6, 7, 5, 4, 8}, b{2, 4, 4, 5, 5, 6, 3, 6};
  const auto r = paired_comparison(a, b);
  EXPECT_EQ(r.n, 8u);
  EXPECT_DOUBLE_EQ(r.mean_difference, 0.875);
  EXPECT_NEAR(r.t, 2.497271238044365, 1e-12);
  EXPECT_NEAR(r.p_value, 0.02057811424460156, 1e-12);
  const auto flip = paired_comparison(b, a);
  EXPECT_NEAR(flip.p_value, 1.0 - 0.02057811424460156, 1e-12);
}

// scipy.stats.t.sf(2.0, 9) and t.sf(-1.5, 4).
TEST(Stats, TailProbabilities) {
  // Mean 2 and standard error 1 over ten differences: t = 2 on 9 degrees of freedom.
  std::vector<double> d{2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
  const double half = std::sqrt(10.0 * 9.0 / 2.0);
  d[0] += half;
  d[1] -= half;
  const std::vector<double> zero(10, 0.0);
  const auto r = paired_comparison(d, zero);
  EXPECT_NEAR(r.t, 2.0, 1e-12);
  EXPECT_NEAR(r.p_value, 0.03827641188535047, 1e-12);

  std::vector<double> e{-1.5, -1.5, -1.5, -1.5, -1.5};
  const double h2 = std::sqrt(5.0 * 4.0 / 2.0);
  e[0] += h2;
  e[1] -= h2;
  const auto r2 = paired_comparison(e, std::vector<double>(5, 0.0));
  EXPECT_NEAR(r2.t, -1.5, 1e-12);
  EXPECT_NEAR(r2.p_value, 0.896, 1e-12);
}

TEST(Stats, DegenerateDifferences) {
  const std::vector<double> a{2, 3, 4}, b{1, 2, 3};
  EXPECT_EQ(paired_comparison(a, b).p_value, 0.0);
  EXPECT_EQ(paired_comparison(b, a).p_value, 1.0);
  EXPECT_EQ(paired_comparison(a, a).p_value, 0.5);
  EXPECT_THROW(paired_comparison(a, std::vector<double>{1, 2}), InvalidArgument);
  EXPECT_THROW(paired_comparison(std::vector<double>{1}, std::vector<double>{1}), InvalidArgument);
}
