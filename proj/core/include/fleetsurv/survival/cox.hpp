#pragma once

#include <string>
#include <vector>

#include "fleetsurv/dataset.hpp"
#include "fleetsurv/survival/base.hpp"

namespace fleetsurv::survival {

enum class CoxBaseline { kBreslow, kPiecewise };
std::string_view to_string(CoxBaseline b);
CoxBaseline parse_cox_baseline(const std::string& token);

struct CoxConfig {
  CoxBaseline baseline = CoxBaseline::kBreslow;
  int max_iter = 100;
  double tol = 1e-7;            // infinity norm of the gradient in standardized units
  double ridge = 0.0;           // penalty on standardized coefficients
  int piecewise_intervals = 10; // split at event-time quantiles
};

class CoxModel final : public SurvivalModel {
 public:
  [[nodiscard]] std::string_view family() const override { return "cph"; }
  [[nodiscard]] std::size_t features() const override { return static_cast<std::size_t>(beta.size()); }
  [[nodiscard]] const std::vector<double>& grid() const override { return time_grid; }
  void predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const override;

  /// beta . (x - means)
  [[nodiscard]] Eigen::VectorXd risk(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  CoxConfig config;
  Eigen::VectorXd beta;
  Eigen::VectorXd means;
  std::vector<double> time_grid;
  std::vector<double> cumulative_hazard;  // baseline H0 on time_grid
  std::vector<double> breakpoints;        // piecewise baseline only
  std::vector<double> rates;              // piecewise hazard per interval
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;
};

/// Breslow-tie log partial likelihood of `beta` on (x - means).
double cox_log_partial_likelihood(const SurvivalDataset& data, const Eigen::VectorXd& beta);

CoxModel fit_cox(const SurvivalDataset& data, const CoxConfig& config = {});

/// Breslow cumulative baseline hazard on `grid` for linear predictors `eta`.
std::vector<double> breslow_baseline(std::span<const double> durations, std::span<const std::uint8_t> events,
                                     std::span<const double> eta, std::span<const double> grid);

}  // namespace fleetsurv::survival
