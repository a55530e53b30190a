#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fleetsurv/survival/base.hpp"
#include "fleetsurv/survival/curve.hpp"

namespace fleetsurv::explain {

struct BackgroundSet {
  Eigen::MatrixXd rows;     // k x d
  Eigen::VectorXd weights;  // cluster sizes; sums to the source row count
  double inertia = 0.0;
};

/// k-means++ seeding and Lloyd iterations, best of `restarts` runs by
/// inertia. k equal to the row count returns the rows with unit weights.
BackgroundSet kmeans_background(const Eigen::MatrixXd& x, std::size_t k = 100, std::uint64_t seed = 0,
                                int restarts = 10, int max_iter = 300);

/// Batch model evaluation: one prediction per input row.
using PredictFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

/// Day-valued predictions of a fitted survival model.
PredictFn point_predictor(const survival::SurvivalModel& model,
                          survival::PointRule rule = survival::PointRule::kRestrictedMean);

struct ShapOptions {
  std::size_t nsamples = 5000;
  std::uint64_t seed = 0;
};

struct Explanation {
  double base = 0.0;        // weighted background mean prediction
  double prediction = 0.0;  // f(instance)
  Eigen::VectorXd phi;
  bool exact = false;       // every coalition enumerated
  std::size_t coalitions = 0;
  std::vector<std::string> warnings;
};

/// Kernel SHAP with the efficiency constraint imposed exactly. All
/// coalitions are enumerated when d <= 12 and nsamples >= 2^d; otherwise
/// sizes are enumerated while the budget allows and the rest sampled
/// without replacement.
Explanation kernel_shap(const PredictFn& f, std::span<const double> instance, const BackgroundSet& background,
                        const ShapOptions& options = {});

struct RankedFeature {
  std::size_t index = 0;
  std::string name;
  double mean_abs = 0.0;
};

/// Descending mean |phi|, ties by feature index.
std::vector<RankedFeature> rank_features(std::span<const Explanation> explanations,
                                         std::span<const std::string> names);

/// instance_id,base,prediction,<one column per feature>
void write_explanations_csv(std::ostream& out, std::span<const std::string> ids,
                            std::span<const std::string> names, std::span<const Explanation> explanations);

}  // namespace fleetsurv::explain
