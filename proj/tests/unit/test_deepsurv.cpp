#include <gtest/gtest.h>

#include <cmath>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/survival/deepsurv.hpp"
#include "test_support.hpp"

namespace fleetsurv::survival {
namespace {

// Largest |analytic - numeric| / max(|analytic|, |numeric|) over parameters
// whose gradient is not negligibly small.
double max_relative_error(DeepSurvModel model, const SurvivalDataset& data, std::uint64_t seed) {
  auto rng = make_rng(seed);
  for (Eigen::Index i = 0; i < model.params.size(); ++i) model.params[i] += 0.3 * standard_normal(rng);
  Eigen::VectorXd analytic;
  deepsurv_objective(model, data, &analytic);
  double worst = 0.0;
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < model.params.size(); ++i) {
    const double saved = model.params[i];
    model.params[i] = saved + h;
    const double up = deepsurv_objective(model, data, nullptr);
    model.params[i] = saved - h;
    const double down = deepsurv_objective(model, data, nullptr);
    model.params[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

SurvivalDataset twenty_rows() {
  const Eigen::VectorXd beta = (Eigen::VectorXd(3) << 0.6, -0.4, 0.2).finished();
  return testing::synthetic_survival(20, beta, 31, 0.02);
}

TEST(DeepSurvGradient, TwoLayerMatchesFiniteDifferences) {
  const auto data = twenty_rows();
  DeepSurvConfig cfg;
  cfg.hidden = {8, 6};
  cfg.epochs = 0;
  cfg.l2 = 0.01;
  cfg.seed = 4;
  const auto model = fit_deepsurv(data, cfg);
  EXPECT_LE(max_relative_error(model, data, 1), 1e-4);
}

TEST(DeepSurvGradient, BatchNormMatchesFiniteDifferences) {
  const auto data = twenty_rows();
  DeepSurvConfig cfg;
  cfg.hidden = {8, 6};
  cfg.epochs = 0;
  cfg.batchnorm = true;
  cfg.seed = 5;
  const auto model = fit_deepsurv(data, cfg);
  EXPECT_LE(max_relative_error(model, data, 2), 1e-4);
}

TEST(DeepSurvGradient, LinearModel) {
  const auto data = twenty_rows();
  DeepSurvConfig cfg;
  cfg.hidden = {};
  cfg.epochs = 0;
  const auto model = fit_deepsurv(data, cfg);
  EXPECT_LE(max_relative_error(model, data, 3), 1e-4);
}

TEST(DeepSurv, TrainingReducesLossAndIsSeeded) {
  const Eigen::VectorXd beta = (Eigen::VectorXd(2) << 0.9, -0.5).finished();
  const auto data = testing::synthetic_survival(300, beta, 12);
  DeepSurvConfig cfg;
  cfg.hidden = {16};
  cfg.epochs = 100;
  cfg.learning_rate = 0.01;
  cfg.dropout = true;
  cfg.dropout_rate = 0.2;
  cfg.seed = 8;
  const auto a = fit_deepsurv(data, cfg);
  ASSERT_EQ(a.loss_trace.size(), 100u);
  EXPECT_LT(a.loss_trace.back(), a.loss_trace.front());
  const auto b = fit_deepsurv(data, cfg);
  EXPECT_EQ(a.params, b.params);

  // Risk ordering follows the true coefficients.
  Eigen::MatrixXd probe(2, 2);
  probe << 1.0, -1.0, -1.0, 1.0;
  const auto r = a.risk(probe);
  EXPECT_GT(r[0], r[1]);
}

TEST(DeepSurv, RejectsBadConfig) {
  const auto data = twenty_rows();
  DeepSurvConfig cfg;
  cfg.hidden = {0};
  EXPECT_THROW(fit_deepsurv(data, cfg), UsageError);
  cfg.hidden = {4};
  cfg.dropout = true;
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(fit_deepsurv(data, cfg), UsageError);
  auto censored = data;
  std::fill(censored.event.begin(), censored.event.end(), 0);
  EXPECT_THROW(fit_deepsurv(censored, {}), DataError);
}

}  // namespace
}  // namespace fleetsurv::survival
