#include "fleetsurv/survival/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/rng.hpp"
#include "fleetsurv/survival/kaplan_meier.hpp"

namespace fleetsurv::survival {
namespace {

// Log-rank chi-square for rows `idx` (ascending duration) split by `left`.
double logrank(const double* t, const std::uint8_t* e, std::span<const std::size_t> idx,
               const std::vector<std::uint8_t>& left) {
  double at_risk = static_cast<double>(idx.size());
  double at_risk_left = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) at_risk_left += left[i];
  double observed = 0.0;
  double expected = 0.0;
  double var = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    const double time = t[idx[i]];
    double deaths = 0.0;
    double deaths_left = 0.0;
    double leaving = 0.0;
    double leaving_left = 0.0;
    std::size_t j = i;
    for (; j < idx.size() && t[idx[j]] == time; ++j) {
      const double ev = e[idx[j]] ? 1.0 : 0.0;
      deaths += ev;
      deaths_left += ev * left[j];
      leaving += 1.0;
      leaving_left += left[j];
    }
    if (deaths > 0 && at_risk > 1) {
      const double frac = at_risk_left / at_risk;
      observed += deaths_left;
      expected += deaths * frac;
      var += deaths * frac * (1 - frac) * (at_risk - deaths) / (at_risk - 1);
    } else if (deaths > 0) {
      observed += deaths_left;
      expected += deaths * at_risk_left / at_risk;
    }
    at_risk -= leaving;
    at_risk_left -= leaving_left;
    i = j;
  }
  if (!(var > 0)) return 0.0;
  return (observed - expected) * (observed - expected) / var;
}

struct Builder {
  const SurvivalDataset& data;
  const ForestConfig& config;
  const std::vector<double>& grid;
  int mtry;
  Rng rng;
  SurvivalForest::Tree tree;
  std::vector<std::vector<double>> leaf_rows;
  std::vector<double> column;

  int grow(std::vector<std::size_t> idx, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<std::size_t>(id)].size = idx.size();
    const auto min_size = static_cast<std::size_t>(config.min_node_size);
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_stat = 0.0;
    std::vector<std::uint8_t> left(idx.size());

    if (depth < config.max_depth && idx.size() >= 2 * min_size) {
      const auto d = static_cast<std::size_t>(data.x.cols());
      std::vector<std::size_t> features(d);
      std::iota(features.begin(), features.end(), std::size_t{0});
      // Partial Fisher-Yates for mtry distinct features.
      for (std::size_t k = 0; k < static_cast<std::size_t>(mtry); ++k) {
        const auto j = k + static_cast<std::size_t>(uniform_index(rng, d - k));
        std::swap(features[k], features[j]);
      }
      for (std::size_t k = 0; k < static_cast<std::size_t>(mtry); ++k) {
        const auto f = static_cast<Eigen::Index>(features[k]);
        column.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) column[i] = data.x(static_cast<Eigen::Index>(idx[i]), f);
        std::vector<double> sorted = column;
        std::sort(sorted.begin(), sorted.end());
        // Admissible thresholds keep min_size rows on each side.
        const double lo = sorted[min_size - 1];
        const double hi_bound = sorted[idx.size() - min_size];
        std::vector<double> values(sorted.begin(), sorted.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        std::vector<double> candidates;
        for (double v : values) {
          if (v >= lo && v < hi_bound) candidates.push_back(v);
        }
        if (candidates.empty()) continue;
        if (candidates.size() > static_cast<std::size_t>(config.thresholds)) {
          for (std::size_t c = 0; c < static_cast<std::size_t>(config.thresholds); ++c) {
            const auto j = c + static_cast<std::size_t>(uniform_index(rng, candidates.size() - c));
            std::swap(candidates[c], candidates[j]);
          }
          candidates.resize(static_cast<std::size_t>(config.thresholds));
          std::sort(candidates.begin(), candidates.end());
        }
        for (double thr : candidates) {
          std::size_t nl = 0;
          for (std::size_t i = 0; i < idx.size(); ++i) {
            left[i] = column[i] <= thr;
            nl += left[i];
          }
          if (nl < min_size || idx.size() - nl < min_size) continue;
          const double stat = logrank(data.duration.data(), data.event.data(), idx, left);
          if (stat > best_stat) {
            best_stat = stat;
            best_feature = static_cast<int>(f);
            best_threshold = thr;
          }
        }
      }
    }

    if (best_feature < 0) {
      auto& node = tree.nodes[static_cast<std::size_t>(id)];
      node.leaf = static_cast<int>(leaf_rows.size());
      std::vector<double> curve(grid.size());
      kaplan_meier_on_grid(std::span<const double>(data.duration.data(), data.rows()), data.event, idx, grid, curve);
      leaf_rows.push_back(std::move(curve));
      return id;
    }
    std::vector<std::size_t> li;
    std::vector<std::size_t> ri;
    for (auto r : idx) {
      (data.x(static_cast<Eigen::Index>(r), best_feature) <= best_threshold ? li : ri).push_back(r);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = grow(std::move(li), depth + 1);
    const int r = grow(std::move(ri), depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return id;
  }
};

}  // namespace

double logrank_statistic(std::span<const double> durations, std::span<const std::uint8_t> events,
                         std::span<const std::uint8_t> left) {
  std::vector<std::size_t> idx(durations.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return durations[a] < durations[b]; });
  std::vector<std::uint8_t> l(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) l[i] = left[idx[i]];
  return logrank(durations.data(), events.data(), idx, l);
}

int SurvivalForest::leaf_of(std::size_t t, const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const auto& nodes = trees[t].nodes;
  int n = 0;
  while (nodes[static_cast<std::size_t>(n)].feature >= 0) {
    const auto& node = nodes[static_cast<std::size_t>(n)];
    n = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(n)].leaf;
}

void SurvivalForest::predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const {
  check_dimension(x.cols());
  out = Eigen::MatrixXd::Zero(x.rows(), static_cast<Eigen::Index>(time_grid.size()));
  for (std::size_t t = 0; t < trees.size(); ++t) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) += trees[t].leaves.row(leaf_of(t, x.row(i)));
  }
  out /= static_cast<double>(trees.size());
}

SurvivalForest fit_csf(const SurvivalDataset& data, const ForestConfig& config) {
  data.validate();
  if (config.num_trees < 1) throw UsageError("num-trees must be positive");
  if (config.min_node_size < 1) throw UsageError("min-node-size must be positive");
  if (config.max_depth < 0) throw UsageError("max-depth must be non-negative");
  if (data.rows() == 0) throw DataError("forest needs at least one row");
  SurvivalForest forest;
  forest.config = config;
  forest.feature_names = data.feature_names;
  forest.feature_count = static_cast<std::size_t>(data.x.cols());
  forest.time_grid = time_grid(std::span<const double>(data.duration.data(), data.rows()));
  const int d = static_cast<int>(data.x.cols());
  const int mtry = std::clamp(config.mtry > 0 ? config.mtry : static_cast<int>(std::ceil(std::sqrt(d))), 1, std::max(1, d));

  // Rows sorted once by duration; bootstrap draws are re-sorted so every
  // node's index list stays ordered for the log-rank walk.
  std::vector<std::size_t> by_time(data.rows());
  std::iota(by_time.begin(), by_time.end(), std::size_t{0});
  std::stable_sort(by_time.begin(), by_time.end(), [&](std::size_t a, std::size_t b) {
    return data.duration[static_cast<Eigen::Index>(a)] < data.duration[static_cast<Eigen::Index>(b)];
  });
  std::vector<std::size_t> rank(data.rows());
  for (std::size_t i = 0; i < by_time.size(); ++i) rank[by_time[i]] = i;

  forest.trees.resize(static_cast<std::size_t>(config.num_trees));
  auto build = [&](std::size_t t) {
    Builder b{data, config, forest.time_grid, mtry, make_rng(config.seed, t), {}, {}, {}};
    std::vector<std::size_t> idx;
    if (config.bootstrap) {
      idx.resize(data.rows());
      for (auto& r : idx) r = static_cast<std::size_t>(uniform_index(b.rng, data.rows()));
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t c) { return rank[a] < rank[c]; });
    } else {
      idx = by_time;
    }
    b.grow(std::move(idx), 0);
    b.tree.leaves.resize(static_cast<Eigen::Index>(b.leaf_rows.size()), static_cast<Eigen::Index>(forest.time_grid.size()));
    for (std::size_t l = 0; l < b.leaf_rows.size(); ++l) {
      b.tree.leaves.row(static_cast<Eigen::Index>(l)) =
          Eigen::Map<const Eigen::RowVectorXd>(b.leaf_rows[l].data(), static_cast<Eigen::Index>(b.leaf_rows[l].size()));
    }
    forest.trees[t] = std::move(b.tree);
  };
  const auto workers = static_cast<std::size_t>(std::clamp(config.threads, 1, config.num_trees));
  if (workers == 1) {
    for (std::size_t t = 0; t < forest.trees.size(); ++t) build(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < forest.trees.size(); t += workers) build(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  const bool stumps = std::all_of(forest.trees.begin(), forest.trees.end(),
                                  [](const SurvivalForest::Tree& t) { return t.nodes.size() == 1; });
  if (stumps) forest.warnings.push_back("no valid split found; every tree is a single leaf");
  return forest;
}

}  // namespace fleetsurv::survival
