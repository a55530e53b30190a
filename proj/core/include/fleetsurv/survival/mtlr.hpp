#pragma once

#include <cstdint>
#include <vector>

#include "fleetsurv/dataset.hpp"
#include "fleetsurv/survival/base.hpp"
#include "fleetsurv/survival/optim.hpp"

namespace fleetsurv::survival {

struct MtlrConfig {
  int intervals = 0;  // 0 selects min(max training duration, 300)
  double learning_rate = 1e-3;
  int epochs = 500;
  double l2 = 1e-2;
  InitScheme init = InitScheme::kGlorotUniform;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
};

/// Multi-task logistic regression over m uniform interval boundaries
/// tau_1 < ... < tau_m. Death in interval j (j = m + 1 meaning beyond tau_m)
/// has score s_j = sum_{k >= j} (w_k . z + b_k) on standardized z.
class MtlrModel final : public SurvivalModel {
 public:
  [[nodiscard]] std::string_view family() const override { return "mtlr"; }
  [[nodiscard]] std::size_t features() const override { return static_cast<std::size_t>(weights.cols()); }
  [[nodiscard]] const std::vector<double>& grid() const override { return time_grid; }
  void predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const override;

  /// rows x (m + 1) probabilities of the admissible event sequences.
  [[nodiscard]] Eigen::MatrixXd sequence_probabilities(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  /// Mean negative censored log-likelihood plus the L2 term.
  [[nodiscard]] double loss(const SurvivalDataset& data) const;

  MtlrConfig config;
  Eigen::MatrixXd weights;  // m x d
  Eigen::VectorXd bias;     // m
  Eigen::VectorXd mean;     // standardization
  Eigen::VectorXd scale;
  std::vector<double> boundaries;  // tau_1..tau_m
  std::vector<double> time_grid;   // 0, tau_1..tau_m
  std::vector<double> loss_trace;  // entry 0 is the initial loss

  /// Sets boundaries and grid for m intervals over (0, horizon].
  void set_intervals(int m, double horizon);
};

MtlrModel fit_mtlr(const SurvivalDataset& data, const MtlrConfig& config = {},
                   const TrainingMonitor* monitor = nullptr);

}  // namespace fleetsurv::survival
