#include "fleetsurv/survival/kaplan_meier.hpp"

#include <algorithm>
#include <numeric>

#include "fleetsurv/errors.hpp"

namespace fleetsurv::survival {

std::vector<double> time_grid(std::span<const double> durations) {
  std::vector<double> grid(durations.begin(), durations.end());
  grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

void kaplan_meier_on_grid(std::span<const double> durations, std::span<const std::uint8_t> events,
                          std::span<const std::size_t> order, std::span<const double> grid,
                          std::span<double> out) {
  double s = 1.0;
  std::size_t at_risk = order.size();
  std::size_t i = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    // Absorb every distinct time <= grid[g].
    while (i < order.size() && durations[order[i]] <= grid[g]) {
      const double t = durations[order[i]];
      std::size_t deaths = 0;
      std::size_t leaving = 0;
      while (i < order.size() && durations[order[i]] == t) {
        deaths += events[order[i]] != 0;
        ++leaving;
        ++i;
      }
      if (deaths > 0) s *= static_cast<double>(at_risk - deaths) / static_cast<double>(at_risk);
      at_risk -= leaving;
    }
    out[g] = s;
  }
}

SurvivalCurve kaplan_meier(std::span<const double> durations, std::span<const std::uint8_t> events,
                           std::vector<std::string>* warnings) {
  if (durations.empty()) throw UsageError("Kaplan-Meier needs at least one row");
  if (durations.size() != events.size()) throw UsageError("durations and events differ in length");
  for (double d : durations) {
    if (!(d >= 0.0)) throw DataError("Kaplan-Meier durations must be non-negative");
  }
  std::vector<std::size_t> order(durations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return durations[a] < durations[b]; });
  SurvivalCurve curve;
  curve.grid = time_grid(durations);
  curve.values.resize(curve.grid.size());
  kaplan_meier_on_grid(durations, events, order, curve.grid, curve.values);
  if (warnings && std::none_of(events.begin(), events.end(), [](auto e) { return e != 0; })) {
    warnings->push_back("all rows censored; survival curve is constant 1");
  }
  return curve;
}

}  // namespace fleetsurv::survival
