#include <gtest/gtest.h>

#include <set>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/survival/forest.hpp"
#include "fleetsurv/survival/kaplan_meier.hpp"
#include "test_support.hpp"

namespace fleetsurv::survival {
namespace {

double brute_force_logrank(const std::vector<double>& t, const std::vector<std::uint8_t>& e,
                           const std::vector<std::uint8_t>& left) {
  std::set<double> times;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (e[i]) times.insert(t[i]);
  }
  double o_minus_e = 0;
  double var = 0;
  for (double s : times) {
    double n = 0, n1 = 0, d = 0, d1 = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < s) continue;
      ++n;
      n1 += left[i];
      if (t[i] == s && e[i]) {
        ++d;
        d1 += left[i];
      }
    }
    o_minus_e += d1 - d * n1 / n;
    if (n > 1) var += d * (n1 / n) * (1 - n1 / n) * (n - d) / (n - 1);
  }
  return var > 0 ? o_minus_e * o_minus_e / var : 0.0;
}

TEST(Logrank, MatchesBruteForce) {
  auto rng = make_rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    const auto n = 4 + uniform_index(rng, 60);
    std::vector<double> t(n);
    std::vector<std::uint8_t> e(n), left(n);
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = static_cast<double>(1 + uniform_index(rng, 20));
      e[i] = uniform01(rng) < 0.75;
      left[i] = uniform01(rng) < 0.4;
    }
    EXPECT_NEAR(logrank_statistic(t, e, left), brute_force_logrank(t, e, left), 1e-10);
  }
}

SurvivalDataset forest_data(std::size_t n, std::uint64_t seed) {
  const Eigen::VectorXd beta = (Eigen::VectorXd(3) << 1.2, 0.0, -0.6).finished();
  return testing::synthetic_survival(n, beta, seed, 0.01);
}

TEST(Forest, NodesRespectMinimumSizeAndDepth) {
  const auto data = forest_data(400, 21);
  ForestConfig cfg;
  cfg.num_trees = 5;
  cfg.max_depth = 4;
  cfg.min_node_size = 15;
  cfg.seed = 2;
  const auto forest = fit_csf(data, cfg);
  ASSERT_EQ(forest.trees.size(), 5u);
  for (const auto& tree : forest.trees) {
    EXPECT_GT(tree.nodes.size(), 1u);
    for (const auto& node : tree.nodes) {
      EXPECT_GE(node.size, 15u);
      if (node.feature >= 0) {
        EXPECT_EQ(tree.nodes[static_cast<std::size_t>(node.left)].size +
                      tree.nodes[static_cast<std::size_t>(node.right)].size,
                  node.size);
      }
    }
    EXPECT_LE(tree.nodes.size(), 31u);
  }
}

TEST(Forest, SingleLeafEqualsKaplanMeier) {
  const auto data = forest_data(30, 22);
  ForestConfig cfg;
  cfg.num_trees = 3;
  cfg.min_node_size = 30;
  cfg.bootstrap = false;
  const auto forest = fit_csf(data, cfg);
  EXPECT_FALSE(forest.warnings.empty());
  const auto km = kaplan_meier(std::span<const double>(data.duration.data(), data.rows()), data.event);
  Eigen::MatrixXd curves;
  forest.predict_curves(data.x.topRows(2), curves);
  ASSERT_EQ(forest.grid(), km.grid);
  for (Eigen::Index g = 0; g < curves.cols(); ++g) EXPECT_NEAR(curves(0, g), km.values[static_cast<std::size_t>(g)], 1e-12);
}

TEST(Forest, ThreadCountDoesNotChangeTrees) {
  const auto data = forest_data(300, 23);
  ForestConfig cfg;
  cfg.num_trees = 8;
  cfg.seed = 5;
  const auto one = fit_csf(data, cfg);
  cfg.threads = 4;
  const auto four = fit_csf(data, cfg);
  Eigen::MatrixXd a, b;
  one.predict_curves(data.x, a);
  four.predict_curves(data.x, b);
  EXPECT_EQ(a, b);
}

TEST(Forest, SplitsOnInformativeFeature) {
  const auto data = forest_data(600, 24);
  ForestConfig cfg;
  cfg.num_trees = 10;
  cfg.mtry = 3;
  cfg.seed = 6;
  const auto forest = fit_csf(data, cfg);
  std::size_t root_on_first = 0;
  for (const auto& tree : forest.trees) root_on_first += tree.nodes[0].feature == 0;
  EXPECT_GE(root_on_first, 8u);
}

TEST(Forest, RejectsBadConfig) {
  const auto data = forest_data(20, 25);
  ForestConfig cfg;
  cfg.num_trees = 0;
  EXPECT_THROW(fit_csf(data, cfg), UsageError);
  cfg.num_trees = 1;
  cfg.min_node_size = 0;
  EXPECT_THROW(fit_csf(data, cfg), UsageError);
}

}  // namespace
}  // namespace fleetsurv::survival
