#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fleetsurv/survival/curve.hpp"

namespace fleetsurv::survival {

/// Common interface of the fitted estimators. Predictions are survival
/// probabilities on the model's own ascending time grid (grid[0] == 0).
class SurvivalModel {
 public:
  virtual ~SurvivalModel() = default;

  [[nodiscard]] virtual std::string_view family() const = 0;
  [[nodiscard]] virtual std::size_t features() const = 0;
  [[nodiscard]] virtual const std::vector<double>& grid() const = 0;

  /// out(i, g) = S(grid[g] | x.row(i)).
  virtual void predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const = 0;

  [[nodiscard]] SurvivalCurve predict_curve(std::span<const double> x) const;

  std::vector<std::string> feature_names;
  std::vector<std::string> warnings;

 protected:
  void check_dimension(Eigen::Index cols) const;
};

/// Checkpoint hook for iterative fits. Called after the listed epochs (1-based
/// counts of completed epochs) with a usable snapshot of the model; returning
/// false stops training.
struct TrainingMonitor {
  std::vector<int> checkpoints;
  std::function<bool(std::size_t checkpoint, const SurvivalModel& snapshot)> on_checkpoint;
};

}  // namespace fleetsurv::survival
