#include "fleetsurv/survival/curve.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fleetsurv/errors.hpp"

namespace fleetsurv::survival {

double SurvivalCurve::at(double t) const {
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  if (it == grid.begin()) return 1.0;
  return values[static_cast<std::size_t>(it - grid.begin()) - 1];
}

std::string SurvivalCurve::check() const {
  if (grid.empty()) return "empty grid";
  if (grid.size() != values.size()) return "grid and values differ in length";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] < 0.0 || values[i] > 1.0) {
      return fmt::format("S({}) = {} outside [0, 1]", grid[i], values[i]);
    }
    if (i > 0 && !(grid[i] > grid[i - 1])) return fmt::format("grid not ascending at index {}", i);
    if (i > 0 && values[i] > values[i - 1]) return fmt::format("S increases at t = {}", grid[i]);
  }
  return {};
}

PointRule parse_point_rule(const std::string& token) {
  if (token == "restricted_mean" || token == "rmst") return PointRule::kRestrictedMean;
  if (token == "median") return PointRule::kMedian;
  throw UsageError("unknown point rule '" + token + "' (restricted_mean|median)");
}

double restricted_mean(std::span<const double> grid, std::span<const double> values) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) area += values[i] * (grid[i + 1] - grid[i]);
  return area;
}

PointPrediction point_predict(std::span<const double> grid, std::span<const double> values, PointRule rule) {
  if (grid.empty()) throw UsageError("cannot reduce a survival curve with an empty grid");
  if (rule == PointRule::kRestrictedMean) return {restricted_mean(grid, values), false};
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (values[i] <= 0.5) return {grid[i], false};
  }
  return {grid.back(), true};
}

PointPrediction point_predict(const SurvivalCurve& curve, PointRule rule) {
  return point_predict(curve.grid, curve.values, rule);
}

}  // namespace fleetsurv::survival
