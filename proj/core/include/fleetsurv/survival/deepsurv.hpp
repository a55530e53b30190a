#pragma once

#include <cstdint>
#include <vector>

#include "fleetsurv/dataset.hpp"
#include "fleetsurv/survival/base.hpp"
#include "fleetsurv/survival/optim.hpp"

namespace fleetsurv::survival {

struct DeepSurvConfig {
  std::vector<int> hidden = {32, 32};  // ReLU layers; empty gives a linear model
  double learning_rate = 1e-3;
  int epochs = 200;
  double l2 = 0.0;
  bool batchnorm = false;
  bool dropout = false;
  double dropout_rate = 0.5;
  InitScheme init = InitScheme::kGlorotUniform;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
};

/// Feed-forward risk network trained on the negative Cox partial
/// likelihood, with a Breslow baseline fitted on the trained risk scores.
/// Hidden block: linear -> [batch norm] -> ReLU -> [dropout].
class DeepSurvModel final : public SurvivalModel {
 public:
  struct Layer {
    int in = 0;
    int out = 0;
    Eigen::Index weight = 0;  // offset of the out x in (column-major) weight block
    Eigen::Index bias = 0;
    bool batchnorm = false;
    Eigen::Index gamma = 0;
    Eigen::Index beta = 0;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
  };

  [[nodiscard]] std::string_view family() const override { return "deepsurv"; }
  [[nodiscard]] std::size_t features() const override { return static_cast<std::size_t>(mean.size()); }
  [[nodiscard]] const std::vector<double>& grid() const override { return time_grid; }
  void predict_curves(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::MatrixXd& out) const override;

  /// Inference-mode risk score per row (running batch-norm statistics, no dropout).
  [[nodiscard]] Eigen::VectorXd risk(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// Builds the layer layout and initializes parameters for d inputs.
  void build(int d, Rng& rng);
  /// Refits the Breslow baseline on `data` using the current network.
  void fit_baseline(const SurvivalDataset& data);

  DeepSurvConfig config;
  std::vector<Layer> layers;  // hidden layers then the scalar output layer
  Eigen::VectorXd params;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  std::vector<double> time_grid;
  std::vector<double> cumulative_hazard;
  std::vector<double> loss_trace;  // training objective per epoch, entry 0 before the first update
};

/// Training-mode objective (mean negative Breslow partial likelihood over
/// events plus l2/2 * |W|^2) at model.params, without dropout. Batch norm
/// uses batch statistics. Fills `gradient` when given.
double deepsurv_objective(const DeepSurvModel& model, const SurvivalDataset& data, Eigen::VectorXd* gradient);

DeepSurvModel fit_deepsurv(const SurvivalDataset& data, const DeepSurvConfig& config = {},
                           const TrainingMonitor* monitor = nullptr);

}  // namespace fleetsurv::survival
