#pragma once

#include <cstdint>
#include <vector>

#include "fleetsurv/dataset.hpp"
#include "fleetsurv/survival/base.hpp"

namespace fleetsurv::survival {

struct ForestConfig {
  int num_trees = 10;
  int max_depth = 5;
  int min_node_size = 10;
  bool bootstrap = true;
  int mtry = 0;        // features tried per node; 0 selects ceil(sqrt(d))
  int thresholds = 20; // candidate split values per feature
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Survival forest with log-rank splits. A row goes left when
/// x[feature] <= threshold.
class SurvivalForest final : public SurvivalModel {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int leaf = -1;          // row of Tree::leaves
    std::size_t size = 0;   // training rows reaching the node
  };
  struct Tree {
    std::vector<Node> nodes;  // nodes[0] is the root
    Eigen::MatrixXd leaves;   // leaf x grid survival values
  };

  [[nodiscard]] std::string_view family() const override { return "csf"; }
  [[nodiscard]] std::size_t features() const override { return feature_count; }
  [[nodiscard]] const std::vector<double>& grid() const override { return time_grid; }
  void predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const override;

  [[nodiscard]] int leaf_of(std::size_t tree, const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  ForestConfig config;
  std::size_t feature_count = 0;
  std::vector<double> time_grid;
  std::vector<Tree> trees;
};

/// Two-sample log-rank chi-square statistic of `left` vs the rest.
double logrank_statistic(std::span<const double> durations, std::span<const std::uint8_t> events,
                         std::span<const std::uint8_t> left);

SurvivalForest fit_csf(const SurvivalDataset& data, const ForestConfig& config = {});

}  // namespace fleetsurv::survival
