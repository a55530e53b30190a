#pragma once

#include <span>
#include <string>
#include <vector>

namespace fleetsurv::survival {

/// Right-continuous step function: S(t) = values[i] for grid[i] <= t < grid[i+1].
struct SurvivalCurve {
  std::vector<double> grid;
  std::vector<double> values;

  [[nodiscard]] double at(double t) const;  // 1 before the first grid point
  /// Empty string when valid, otherwise the first violation found.
  [[nodiscard]] std::string check() const;
};

enum class PointRule { kRestrictedMean, kMedian };
PointRule parse_point_rule(const std::string& token);

struct PointPrediction {
  double days = 0.0;
  bool undefined_median = false;  // S never reached 0.5; days is the horizon
};

/// Area under S over [grid.front(), grid.back()].
double restricted_mean(std::span<const double> grid, std::span<const double> values);

PointPrediction point_predict(const SurvivalCurve& curve, PointRule rule = PointRule::kRestrictedMean);
PointPrediction point_predict(std::span<const double> grid, std::span<const double> values,
                              PointRule rule = PointRule::kRestrictedMean);

}  // namespace fleetsurv::survival
