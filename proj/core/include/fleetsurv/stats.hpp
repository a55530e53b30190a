#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace fleetsurv::stats {

struct TestResult {
  std::string test;  // shapiro-wilk | ks-2sample | t-ind | t-welch | f-variance
  double statistic = 0.0;
  double p_value = 1.0;
  double alpha = 0.01;
  bool significant = false;  // p_value < alpha
  double df = 0.0;           // degrees of freedom where meaningful
};

/// Royston's AS R94 Shapiro-Wilk W test; valid for 3 <= n <= 5000.
/// Throws UsageError for n < 3 or a zero-range sample.
TestResult shapiro_wilk(std::span<const double> sample, double alpha = 0.01);

/// Two-sided two-sample Kolmogorov-Smirnov. The p-value is exact
/// (lattice-path counting) when max(n1, n2) <= 10000, otherwise the
/// asymptotic Kolmogorov distribution.
TestResult ks_2samp(std::span<const double> a, std::span<const double> b, double alpha = 0.01);

/// Two-sided independent-samples t-test: pooled variance ("t-ind") or
/// Welch-Satterthwaite ("t-welch"). Zero variance in both samples gives
/// t = 0, p = 1 for equal means and |t| = inf, p = 0 otherwise.
TestResult t_test(std::span<const double> a, std::span<const double> b, bool equal_variance,
                  double alpha = 0.01);

/// Two-sided F test of equal variances.
TestResult variance_ratio_test(std::span<const double> a, std::span<const double> b,
                               double alpha = 0.05);

struct DistributionComparison {
  TestResult normality_a;
  TestResult normality_b;
  TestResult comparison;  // t-ind when both samples look normal, else ks-2sample
  std::size_t draws = 0;
  std::vector<std::string> warnings;
};

/// Draws `draws` values from each sample without replacement, checks both
/// for normality with Shapiro-Wilk, then compares them with a pooled t-test
/// (both normal) or a two-sample KS test.
DistributionComparison compare_distributions(std::span<const double> a, std::span<const double> b,
                                             std::size_t draws, double alpha, std::uint64_t seed);

struct MeanComparison {
  TestResult variance_test;  // F pretest at 0.05
  TestResult comparison;     // t-ind or t-welch
};

MeanComparison mean_comparison(std::span<const double> a, std::span<const double> b,
                               double alpha = 0.05, double variance_alpha = 0.05);

double mean(std::span<const double> x);
/// Sample variance (n - 1 denominator); 0 for n < 2.
double variance(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
/// Linear-interpolation quantile of an unsorted sample, q in [0, 1].
double quantile(std::vector<double> x, double q);

}  // namespace fleetsurv::stats
