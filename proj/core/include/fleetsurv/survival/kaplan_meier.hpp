#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fleetsurv/survival/curve.hpp"

namespace fleetsurv::survival {

/// Product-limit estimate on {0} and every distinct observed duration.
/// An all-censored input gives S = 1 and a warning.
SurvivalCurve kaplan_meier(std::span<const double> durations, std::span<const std::uint8_t> events,
                           std::vector<std::string>* warnings = nullptr);

/// Product-limit estimate evaluated at each point of `grid` (ascending).
/// `order` lists row indices sorted by ascending duration.
void kaplan_meier_on_grid(std::span<const double> durations, std::span<const std::uint8_t> events,
                          std::span<const std::size_t> order, std::span<const double> grid,
                          std::span<double> out);

/// {0} plus the sorted distinct durations.
std::vector<double> time_grid(std::span<const double> durations);

}  // namespace fleetsurv::survival
