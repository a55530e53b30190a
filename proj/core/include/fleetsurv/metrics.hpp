#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fleetsurv::tuning {

struct MetricsReport {
  std::string label;
  std::size_t n = 0;
  double rmse = 0.0;
  std::optional<double> r2;    // undefined for zero-variance actuals
  std::optional<double> mape;  // percent
};

struct MetricOptions {
  bool r2 = true;
  bool mape = true;
};

/// RMSE, R^2 and MAPE. Throws DataError for length mismatches, empty input,
/// a zero actual with MAPE requested, or n = 1 with R^2 requested.
MetricsReport evaluate(std::span<const double> predicted, std::span<const double> actual,
                       MetricOptions options = {}, std::string label = {});

inline constexpr std::array<double, 12> kPercentiles = {10, 20, 30, 40, 50, 60, 70, 75, 80, 90, 95, 99};

struct Descriptive {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double min = 0.0;
  std::array<double, kPercentiles.size()> percentiles{};
  double max = 0.0;
};

Descriptive describe(std::span<const double> values);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

struct PredictionAnalysis {
  // Uncensored rows.
  Descriptive ratio;            // predicted / actual
  Descriptive abs_difference;   // |predicted - actual|
  double pearson = 0.0;
  double share_early = 0.0;     // predicted < actual
  double share_late = 0.0;      // predicted > actual
  double share_exact = 0.0;
  // Right-censored rows.
  std::size_t censored = 0;
  std::optional<double> censored_share_above;  // predicted > censored duration
  // Actual vs predicted mean/std for all, uncensored and right-censored rows.
  std::array<MeanStd, 3> actual{};
  std::array<MeanStd, 3> predicted{};
};

/// `event[i]` = 1 marks an uncensored row. Throws DataError on misaligned
/// input or fewer than two uncensored rows.
PredictionAnalysis prediction_analysis(std::span<const double> predicted, std::span<const double> actual,
                                       std::span<const std::uint8_t> event);

std::string metrics_json(std::span<const MetricsReport> reports);
std::string analysis_json(const PredictionAnalysis& analysis);

}  // namespace fleetsurv::tuning
