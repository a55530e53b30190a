#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fleetsurv/config.hpp"
#include "fleetsurv/errors.hpp"
#include "fleetsurv/ingestion.hpp"
#include "fleetsurv/simgen.hpp"
#include "fleetsurv/stats.hpp"
#include "test_support.hpp"

namespace fleetsurv::sim {
namespace {

const char* const kFiles[] = {"trips.csv", "stations.csv", "maintenance.csv",
                              "distances.csv", "weather.csv", "ground_truth.csv"};

TEST(DrawLifetime, ExponentialMeanMatchesScale) {
  auto rng = make_rng(1);
  const int n = 40000;
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += draw_lifetime(rng, 1.0, 120.0);
  EXPECT_NEAR(sum / n / 120.0, 1.0, 0.05);
  auto again = make_rng(2);
  for (int i = 0; i < 1000; ++i) EXPECT_GE(draw_lifetime(again, 3.0, 0.5), 1);
}

double median_of(const Bundle& b, const std::string& component, bool realized) {
  std::vector<double> v;
  for (const auto& g : b.ground_truth) {
    if (g.component == component) v.push_back(realized ? g.lifetime_days : g.true_expected_days);
  }
  return stats::quantile(v, 0.5);
}

TEST(Simulator, StrongerDistanceEffectShortensLifetimes) {
  auto cfg = testing::small_sim_config(4);
  const auto base = simulate_fleet(cfg);
  for (auto& h : cfg.hazards) h.distance_coef *= 2.0;
  const auto doubled = simulate_fleet(cfg);
  for (const auto& h : cfg.hazards) {
    SCOPED_TRACE(h.component);
    EXPECT_LT(median_of(doubled, h.component, false), median_of(base, h.component, false));
    EXPECT_LT(median_of(doubled, h.component, true), median_of(base, h.component, true));
    std::size_t base_failures = 0, doubled_failures = 0;
    for (const auto& [bike, n] : base.failures.at(h.component)) base_failures += n;
    for (const auto& [bike, n] : doubled.failures.at(h.component)) doubled_failures += n;
    EXPECT_GT(doubled_failures, base_failures);
  }
}

TEST(Simulator, BundleLoadsWithoutRejects) {
  const auto cfg = testing::small_sim_config(5);
  const auto bundle = simulate_fleet(cfg);
  testing::TempDir dir("bundle");
  write_bundle(bundle, dir.str());
  ingest::IngestOptions opts;
  opts.study_window = cfg.window;
  opts.max_reject_rate = 0.0;
  const auto trips = ingest::load_trips(dir.str("trips.csv"), opts);
  const auto mos = ingest::load_maintenance(dir.str("maintenance.csv"), opts);
  const auto p = ingest::load_providers(dir.str("stations.csv"), dir.str("distances.csv"), dir.str("weather.csv"), opts);
  EXPECT_EQ(trips.report.rejected, 0u);
  EXPECT_EQ(trips.trips.size(), bundle.trips.size());
  EXPECT_EQ(mos.report.rejected, 0u);
  EXPECT_EQ(mos.ops.size(), bundle.maintenance.size());
  EXPECT_EQ(p.station_report.rejected + p.distance_report.rejected + p.weather_report.rejected, 0u);
  EXPECT_EQ(p.stations.size(), cfg.stations);
  EXPECT_EQ(p.distances.size(), cfg.stations * (cfg.stations - 1));

  const auto truth = read_ground_truth(dir.str("ground_truth.csv"));
  ASSERT_EQ(truth.size(), bundle.ground_truth.size());
  EXPECT_EQ(truth.front().unit_id, bundle.ground_truth.front().unit_id);
  EXPECT_DOUBLE_EQ(truth.back().true_expected_days, bundle.ground_truth.back().true_expected_days);
}

TEST(Simulator, SameSeedGivesIdenticalFiles) {
  auto cfg = testing::small_sim_config(6);
  testing::TempDir a("bundle_a"), b("bundle_b"), c("bundle_c");
  write_bundle(simulate_fleet(cfg), a.str());
  write_bundle(simulate_fleet(cfg), b.str());
  cfg.threads = 3;
  write_bundle(simulate_fleet(cfg), c.str());
  for (const char* f : kFiles) {
    SCOPED_TRACE(f);
    const auto bytes = testing::read_file(a.path() / f);
    EXPECT_FALSE(bytes.empty());
    EXPECT_EQ(bytes, testing::read_file(b.path() / f));
    EXPECT_EQ(bytes, testing::read_file(c.path() / f));
  }
  cfg.seed = 7;
  testing::TempDir d("bundle_d");
  write_bundle(simulate_fleet(cfg), d.str());
  EXPECT_NE(testing::read_file(a.path() / "trips.csv"), testing::read_file(d.path() / "trips.csv"));
}

TEST(Simulator, GroundTruthCoversEveryUnit) {
  const auto cfg = testing::small_sim_config(8);
  const auto bundle = simulate_fleet(cfg);
  const auto u = testing::units_from_bundle(bundle, "brake_pads", cfg.window);
  std::set<std::string> truth_ids;
  for (const auto& g : bundle.ground_truth) {
    if (g.component == "brake_pads") truth_ids.insert(g.unit_id);
  }
  std::set<std::string> unit_ids;
  for (const auto& unit : u.built.units) unit_ids.insert(unit.unit_id);
  EXPECT_EQ(unit_ids, truth_ids);
}

TEST(Oracle, PerfectAndConstantPredictions) {
  const auto bundle = simulate_fleet(testing::small_sim_config(9));
  std::map<std::string, double> perfect;
  double mean = 0;
  for (const auto& g : bundle.ground_truth) {
    perfect[g.unit_id] = g.true_expected_days;
    mean += g.true_expected_days;
  }
  mean /= static_cast<double>(bundle.ground_truth.size());
  const auto exact = oracle_report(bundle.ground_truth, perfect);
  EXPECT_EQ(exact.n, bundle.ground_truth.size());
  EXPECT_DOUBLE_EQ(exact.rmse, 0.0);
  EXPECT_DOUBLE_EQ(exact.r2, 1.0);
  EXPECT_EQ(exact.deciles.size(), 10u);

  std::map<std::string, double> constant;
  for (const auto& g : bundle.ground_truth) constant[g.unit_id] = mean;
  const auto flat = oracle_report(bundle.ground_truth, constant);
  EXPECT_NEAR(flat.r2, 0.0, 1e-9);
  EXPECT_NEAR(flat.rmse, flat.constant_rmse, 1e-9);

  EXPECT_THROW(oracle_report(bundle.ground_truth, {{"nope:brake_pads:0", 1.0}}), DataError);
  EXPECT_THROW(oracle_report(bundle.ground_truth, {}), DataError);
}

TEST(SimConfig, ValidationAndOverrides) {
  auto cfg = SimConfig::defaults();
  EXPECT_NO_THROW(cfg.validate());
  cfg.stations = 1;
  try {
    cfg.validate();
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_STREQ(e.what(), "infeasible config: 1 stations, at least 2 required");
  }
  cfg = SimConfig::defaults();
  cfg.mechanical.bikes = cfg.electric.bikes = 0;
  EXPECT_THROW(cfg.validate(), UsageError);

  const auto kv = KeyValueConfig::parse(
      "seed = 99\nstations = 9\nstart = 2021-03-01\nend = 2021-09-01\n"
      "mechanical.bikes = 12\nhazard.chain.shape = 3.5\noperation.cleaning.rate_per_day = 0.1\n");
  const auto c = sim_config_from(kv);
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.stations, 9u);
  EXPECT_EQ(c.window.start.to_string(), "2021-03-01");
  EXPECT_EQ(c.mechanical.bikes, 12u);
  const auto chain = std::find_if(c.hazards.begin(), c.hazards.end(), [](const auto& h) { return h.component == "chain"; });
  ASSERT_NE(chain, c.hazards.end());
  EXPECT_DOUBLE_EQ(chain->shape, 3.5);
  EXPECT_THROW(sim_config_from(KeyValueConfig::parse("weekday_profile = 1, 2, 3\n")), UsageError);
}

}  // namespace
}  // namespace fleetsurv::sim
