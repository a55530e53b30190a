#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fleetsurv/rng.hpp"
#include "fleetsurv/survival/mtlr.hpp"
#include "test_support.hpp"

namespace fleetsurv::survival {
namespace {

MtlrModel random_model(int m, int d, std::uint64_t seed, double spread) {
  auto rng = make_rng(seed);
  MtlrModel model;
  model.weights.resize(m, d);
  model.bias.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    for (Eigen::Index j = 0; j < d; ++j) model.weights(k, j) = spread * standard_normal(rng);
    model.bias[k] = spread * standard_normal(rng);
  }
  model.mean = Eigen::VectorXd::Zero(d);
  model.scale = Eigen::VectorXd::Ones(d);
  model.set_intervals(m, 100.0);
  return model;
}

// Probabilities of "first failure in interval j" from all 2^m label strings,
// keeping the admissible ones (once failed, stays failed).
std::vector<double> enumerate(const MtlrModel& model, const Eigen::RowVectorXd& z) {
  const auto m = static_cast<int>(model.weights.rows());
  const Eigen::VectorXd psi = model.weights * z.transpose() + model.bias;
  std::vector<double> weight(static_cast<std::size_t>(m) + 1, 0.0);
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    int first = m;
    bool admissible = true;
    for (int k = 0; k < m; ++k) {
      const bool on = (mask >> k) & 1u;
      if (on && first == m) first = k;
      if (!on && first < m) admissible = false;
    }
    if (!admissible) continue;
    double score = 0.0;
    for (int k = 0; k < m; ++k) {
      if ((mask >> k) & 1u) score += psi[k];
    }
    weight[static_cast<std::size_t>(first)] += std::exp(score);
    total += std::exp(score);
  }
  for (auto& w : weight) w /= total;
  return weight;
}

TEST(Mtlr, SequenceProbabilitiesMatchEnumeration) {
  auto rng = make_rng(77);
  for (int m : {2, 3, 5, 8, 12, 16}) {
    for (int rep = 0; rep < 4; ++rep) {
      const int d = 1 + static_cast<int>(uniform_index(rng, 5));
      const auto model = random_model(m, d, 1000 * m + rep, 0.2 + 0.4 * rep);
      Eigen::MatrixXd x(3, d);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = standard_normal(rng);
      const Eigen::MatrixXd p = model.sequence_probabilities(x);
      ASSERT_EQ(p.cols(), m + 1);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-9);
        const auto oracle = enumerate(model, x.row(i));
        for (int j = 0; j <= m; ++j) EXPECT_NEAR(p(i, j), oracle[static_cast<std::size_t>(j)], 1e-10);
      }
    }
  }
}

TEST(Mtlr, CurvesFollowSequenceProbabilities) {
  const auto model = random_model(10, 3, 5, 0.8);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(20, 3);
  const Eigen::MatrixXd p = model.sequence_probabilities(x);
  Eigen::MatrixXd curves;
  model.predict_curves(x, curves);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_EQ(curves(i, 0), 1.0);
    for (Eigen::Index k = 1; k <= 10; ++k) {
      EXPECT_NEAR(curves(i, k), p.row(i).tail(11 - k).sum(), 1e-12);
      EXPECT_LE(curves(i, k), curves(i, k - 1));
    }
  }
}

TEST(Mtlr, TrainingReducesLoss) {
  const Eigen::VectorXd beta = (Eigen::VectorXd(2) << 0.7, -0.4).finished();
  const auto data = testing::synthetic_survival(300, beta, 8, 0.01);
  MtlrConfig cfg;
  cfg.intervals = 20;
  cfg.epochs = 150;
  cfg.learning_rate = 0.01;
  cfg.seed = 3;
  const auto model = fit_mtlr(data, cfg);
  ASSERT_EQ(model.loss_trace.size(), 151u);
  EXPECT_LT(model.loss_trace.back(), model.loss_trace.front());
  EXPECT_NEAR(model.loss(data), model.loss_trace.back(), 1e-9);
  EXPECT_EQ(model.grid().size(), 21u);
  EXPECT_DOUBLE_EQ(model.grid().back(), data.duration.maxCoeff());

  const auto again = fit_mtlr(data, cfg);
  EXPECT_EQ(again.weights, model.weights);
}

TEST(Mtlr, DefaultIntervalsCapAt300) {
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.1);
  auto data = testing::synthetic_survival(50, beta, 9);
  data.duration *= 100.0;
  MtlrConfig cfg;
  cfg.epochs = 1;
  EXPECT_EQ(fit_mtlr(data, cfg).weights.rows(), 300);
}

}  // namespace
}  // namespace fleetsurv::survival
