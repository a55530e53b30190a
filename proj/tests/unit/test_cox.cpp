#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/survival/cox.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace fleetsurv::survival {
namespace {

SurvivalDataset from_case(const nlohmann::json& c) {
  SurvivalDataset data;
  const auto rows = c["x"].get<std::vector<std::vector<double>>>();
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.front().size());
  for (Eigen::Index j = 0; j < d; ++j) data.feature_names.push_back("x" + std::to_string(j));
  data.x.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) data.x(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  const auto dur = c["duration"].get<std::vector<double>>();
  data.duration = Eigen::Map<const Eigen::VectorXd>(dur.data(), n);
  for (int e : c["event"].get<std::vector<int>>()) data.event.push_back(static_cast<std::uint8_t>(e));
  return data;
}

TEST(CoxReference, MatchesFrozenFits) {
  const auto ref = nlohmann::json::parse(testing::read_file(testing::fixture_path("cox_reference.json")));
  ASSERT_EQ(ref["cases"].size(), 4u);
  for (const auto& c : ref["cases"]) {
    SCOPED_TRACE(c["name"].get<std::string>());
    const auto data = from_case(c);
    const auto expected = c["beta"].get<std::vector<double>>();
    const Eigen::VectorXd beta_ref = Eigen::Map<const Eigen::VectorXd>(expected.data(), data.x.cols());

    // The partial likelihood is invariant to centering, so it must agree at the reference optimum.
    EXPECT_NEAR(cox_log_partial_likelihood(data, beta_ref), c["loglike"].get<double>(), 1e-8);

    const auto model = fit_cox(data);
    EXPECT_TRUE(model.converged);
    for (Eigen::Index j = 0; j < data.x.cols(); ++j) EXPECT_NEAR(model.beta[j], beta_ref[j], 1e-5);
    EXPECT_NEAR(model.log_likelihood, c["loglike"].get<double>(), 1e-8);
    ASSERT_FALSE(model.log_likelihood_trace.empty());
    for (std::size_t k = 1; k < model.log_likelihood_trace.size(); ++k) {
      EXPECT_GE(model.log_likelihood_trace[k], model.log_likelihood_trace[k - 1] - 1e-9);
    }
  }
}

TEST(BreslowBaseline, MatchesRiskSetSum) {
  const Eigen::VectorXd beta = (Eigen::VectorXd(2) << 0.5, -0.3).finished();
  const auto data = testing::synthetic_survival(150, beta, 3, 0.02);
  std::vector<double> eta(data.rows());
  auto rng = make_rng(4);
  for (auto& v : eta) v = standard_normal(rng) * 0.5;
  const std::vector<double> durations(data.duration.data(), data.duration.data() + data.rows());
  const std::vector<double> grid{0, 5, 10, 20, 40, 80, 1000};
  const auto h = breslow_baseline(durations, data.event, eta, grid);
  ASSERT_EQ(h.size(), grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::set<double> times;
    for (std::size_t i = 0; i < data.rows(); ++i) {
      if (data.event[i] && durations[i] <= grid[g]) times.insert(durations[i]);
    }
    double expected = 0;
    for (double s : times) {
      double deaths = 0;
      double denom = 0;
      for (std::size_t i = 0; i < data.rows(); ++i) {
        if (durations[i] >= s) denom += std::exp(eta[i]);
        if (durations[i] == s && data.event[i]) ++deaths;
      }
      expected += deaths / denom;
    }
    EXPECT_NEAR(h[g], expected, 1e-10 * std::max(1.0, expected));
  }
}

TEST(Cox, RecoversHazardRatioTwo) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto rng = make_rng(seed, 9);
    SurvivalDataset data;
    data.feature_names = {"group"};
    const Eigen::Index n = 2000;
    data.x.resize(n, 1);
    data.duration.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g = i % 2;
      data.x(i, 0) = g;
      data.duration[i] = -std::log(1.0 - uniform01(rng)) / (0.05 * (g > 0 ? 2.0 : 1.0));
      data.event.push_back(1);
    }
    const auto model = fit_cox(data);
    EXPECT_NEAR(model.beta[0], std::log(2.0), 0.15);
  }
}

TEST(Cox, PredictionsAreProperCurves) {
  const Eigen::VectorXd beta = (Eigen::VectorXd(3) << 0.4, -0.2, 0.1).finished();
  const auto data = testing::synthetic_survival(300, beta, 5);
  for (auto baseline : {CoxBaseline::kBreslow, CoxBaseline::kPiecewise}) {
    CoxConfig cfg;
    cfg.baseline = baseline;
    const auto model = fit_cox(data, cfg);
    Eigen::MatrixXd curves;
    model.predict_curves(data.x, curves);
    ASSERT_EQ(curves.cols(), static_cast<Eigen::Index>(model.grid().size()));
    for (Eigen::Index i = 0; i < curves.rows(); ++i) {
      EXPECT_DOUBLE_EQ(curves(i, 0), 1.0);
      for (Eigen::Index g = 1; g < curves.cols(); ++g) ASSERT_LE(curves(i, g), curves(i, g - 1));
    }
    const Eigen::MatrixXd centre = model.means.transpose();
    EXPECT_NEAR(model.risk(centre)[0], 0.0, 1e-12);
  }
}

TEST(Cox, RidgeShrinks) {
  const Eigen::VectorXd beta = (Eigen::VectorXd(2) << 0.8, -0.6).finished();
  const auto data = testing::synthetic_survival(200, beta, 6);
  CoxConfig ridge;
  ridge.ridge = 50.0;
  EXPECT_LT(fit_cox(data, ridge).beta.norm(), fit_cox(data).beta.norm());
}

}  // namespace
}  // namespace fleetsurv::survival
