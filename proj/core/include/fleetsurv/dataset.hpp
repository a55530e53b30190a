#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fleetsurv {

/// Rectangular right-censored survival table. Row i has duration[i] days,
/// event[i] (1 = failure observed) and covariates x.row(i).
struct SurvivalDataset {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd x;
  Eigen::VectorXd duration;
  std::vector<std::uint8_t> event;
  std::vector<std::string> row_ids;  // optional, empty or one per row

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(duration.size()); }
  [[nodiscard]] std::size_t features() const { return feature_names.size(); }
  [[nodiscard]] std::size_t event_count() const;
  [[nodiscard]] double event_rate() const;
  [[nodiscard]] SurvivalDataset subset(std::span<const std::size_t> rows) const;

  /// Throws DataError on shape mismatches or non-finite/negative values.
  void validate() const;
};

SurvivalDataset concat(const SurvivalDataset& a, const SurvivalDataset& b);

/// survival.csv: duration_days,event,<features...>. A leading unit_id column
/// is read into row_ids when present.
void write_survival_csv(const std::string& path, const SurvivalDataset& data, bool with_ids = false);
SurvivalDataset read_survival_csv(const std::string& path);

}  // namespace fleetsurv
