#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/rng.hpp"
#include "fleetsurv/stats.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace fleetsurv::stats {
namespace {

using nlohmann::json;

json load_reference() {
  return json::parse(testing::read_file(testing::fixture_path("stats_reference.json")));
}

TEST(StatsReference, MatchesFrozenResults) {
  const auto ref = load_reference();
  ASSERT_EQ(ref["fixtures"].size(), 20u);
  constexpr double tol = 1e-6;
  for (const auto& f : ref["fixtures"]) {
    SCOPED_TRACE(f["name"].get<std::string>());
    const auto a = f["a"].get<std::vector<double>>();
    const auto b = f["b"].get<std::vector<double>>();

    const auto sw_a = shapiro_wilk(a);
    const auto sw_b = shapiro_wilk(b);
    EXPECT_NEAR(sw_a.statistic, f["shapiro_a"][0].get<double>(), tol);
    EXPECT_NEAR(sw_a.p_value, f["shapiro_a"][1].get<double>(), tol);
    EXPECT_NEAR(sw_b.statistic, f["shapiro_b"][0].get<double>(), tol);
    EXPECT_NEAR(sw_b.p_value, f["shapiro_b"][1].get<double>(), tol);

    const auto ks = ks_2samp(a, b);
    EXPECT_NEAR(ks.statistic, f["ks"][0].get<double>(), tol);
    EXPECT_NEAR(ks.p_value, f["ks"][1].get<double>(), tol);

    const auto tp = t_test(a, b, true);
    EXPECT_NEAR(tp.statistic, f["t_pooled"][0].get<double>(), tol);
    EXPECT_NEAR(tp.p_value, f["t_pooled"][1].get<double>(), tol);

    const auto tw = t_test(a, b, false);
    EXPECT_NEAR(tw.statistic, f["t_welch"][0].get<double>(), tol);
    EXPECT_NEAR(tw.p_value, f["t_welch"][1].get<double>(), tol);
    EXPECT_NEAR(tw.df, f["t_welch"][2].get<double>(), tol);

    const auto fr = variance_ratio_test(a, b);
    EXPECT_NEAR(fr.statistic, f["f_ratio"][0].get<double>(), tol);
    EXPECT_NEAR(fr.p_value, f["f_ratio"][1].get<double>(), tol);
  }
}

std::vector<double> normal_sample(std::size_t n, double mu, double sd, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = mu + sd * standard_normal(rng);
  return v;
}

std::vector<double> exponential_sample(std::size_t n, double mean, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = -mean * std::log(1.0 - uniform01(rng));
  return v;
}

TEST(CompareDistributions, NormalPairUsesPooledT) {
  const auto a = normal_sample(3000, 10.0, 2.0, 1);
  const auto b = normal_sample(3000, 10.2, 2.0, 2);
  const auto r = compare_distributions(a, b, 1000, 0.01, 5);
  EXPECT_EQ(r.draws, 1000u);
  EXPECT_FALSE(r.normality_a.significant);
  EXPECT_FALSE(r.normality_b.significant);
  EXPECT_EQ(r.comparison.test, "t-ind");
}

TEST(CompareDistributions, SkewedPairUsesKs) {
  const auto a = exponential_sample(3000, 5.0, 3);
  const auto b = normal_sample(3000, 5.0, 1.0, 4);
  const auto r = compare_distributions(a, b, 1000, 0.01, 5);
  EXPECT_TRUE(r.normality_a.significant);
  EXPECT_EQ(r.comparison.test, "ks-2sample");
  EXPECT_TRUE(r.comparison.significant);
}

TEST(CompareDistributions, ShortSampleCapsDrawsWithWarning) {
  const auto a = normal_sample(200, 0.0, 1.0, 6);
  const auto b = normal_sample(5000, 0.0, 1.0, 7);
  const auto r = compare_distributions(a, b, 1000, 0.01, 5);
  EXPECT_EQ(r.draws, 200u);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(CompareDistributions, SeedDeterminesDraws) {
  const auto a = exponential_sample(4000, 5.0, 8);
  const auto b = exponential_sample(4000, 5.5, 9);
  const auto r1 = compare_distributions(a, b, 500, 0.01, 11);
  const auto r2 = compare_distributions(a, b, 500, 0.01, 11);
  EXPECT_EQ(r1.comparison.statistic, r2.comparison.statistic);
  EXPECT_EQ(r1.normality_a.statistic, r2.normality_a.statistic);
}

TEST(ShapiroWilk, RejectsDegenerateInput) {
  const std::vector<double> two{1.0, 2.0};
  const std::vector<double> flat{3.0, 3.0, 3.0, 3.0};
  EXPECT_THROW(shapiro_wilk(two), UsageError);
  EXPECT_THROW(shapiro_wilk(flat), UsageError);
}

TEST(TTest, ZeroVarianceCases) {
  const std::vector<double> a{2.0, 2.0, 2.0};
  const std::vector<double> b{2.0, 2.0};
  const std::vector<double> c{3.0, 3.0};
  const auto same = t_test(a, b, true);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  const auto differ = t_test(a, c, false);
  EXPECT_TRUE(std::isinf(differ.statistic));
  EXPECT_EQ(differ.p_value, 0.0);
}

TEST(MeanComparison, VariancePretestSelectsVariant) {
  const auto a = normal_sample(400, 0.0, 1.0, 12);
  const auto b = normal_sample(400, 0.0, 1.0, 13);
  const auto c = normal_sample(400, 0.0, 3.0, 14);
  EXPECT_EQ(mean_comparison(a, b).comparison.test, "t-ind");
  EXPECT_EQ(mean_comparison(a, c).comparison.test, "t-welch");
}

TEST(Descriptive, Basics) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{2, 4, 6, 8.5};
  EXPECT_DOUBLE_EQ(mean(x), 2.5);
  EXPECT_DOUBLE_EQ(variance(x), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(quantile(x, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(x, 1.0), 4.0);
  EXPECT_GT(pearson(x, y), 0.99);
}

}  // namespace
}  // namespace fleetsurv::stats
