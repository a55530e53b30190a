#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fleetsurv/config.hpp"
#include "fleetsurv/dates.hpp"
#include "fleetsurv/ingestion.hpp"
#include "fleetsurv/rng.hpp"

namespace fleetsurv::sim {

using ingest::BikeModel;

/// Weibull lifetime in days with scale
///   lambda = scale * exp(-distance_coef * daily_km - speed_coef * speed_kmh - electric_coef * electric)
/// where daily_km and speed_kmh are the bike's nominal usage.
struct HazardSpec {
  std::string component;    // brake_pads, wheel_spokes, chain
  std::string subcategory;  // maintenance token written for a replacement
  std::string category;
  double shape = 2.0;
  double scale = 100.0;
  double distance_coef = 0.0;
  double speed_coef = 0.0;
  double electric_coef = 0.0;
};

/// Non-wear operations drawn as a daily Bernoulli process whose rate scales
/// with the bike's nominal daily distance relative to 5 km.
struct PoissonSpec {
  std::string subcategory;
  std::string category;
  double rate_per_day = 0.0;
  bool usage_scaled = false;
};

struct ModelProfile {
  std::size_t bikes = 0;
  double trips_per_day = 2.0;
  double speed_kmh = 10.0;
  double distance_scale_m = 1500.0;  // destination kernel exp(-d / scale)
  double uphill_preference = 0.0;    // per 50 m of climb, log-weight
};

struct WeatherParams {
  double temp_mean = 16.0;
  double temp_amplitude = 8.0;
  double temp_noise = 2.0;
  double rain_probability = 0.22;
  double rain_mean_mm = 6.0;
  double wind_mean_kmh = 11.0;
  double pressure_mean = 1016.0;
  double pressure_noise = 3.0;
};

struct SimConfig {
  std::uint64_t seed = 1;
  std::size_t stations = 60;
  double area_m = 5000.0;
  double altitude_slope = 0.03;  // meters of altitude per meter northwards
  ModelProfile mechanical{400, 1.6, 10.0, 1500.0, -0.3};
  ModelProfile electric{450, 2.4, 14.0, 2500.0, 0.5};
  double usage_cv = 0.12;
  double speed_cv = 0.06;
  double trip_speed_cv = 0.12;
  double outlier_fraction = 0.01;
  double upgrade_fraction = 0.04;  // share of mechanical bikes converted to electric mid-window
  double weekend_factor = 0.8;
  double season_amplitude = 0.15;
  double rain_factor = 0.65;
  DateWindow window{Date::from_ymd(2022, 1, 1), Date::from_ymd(2023, 1, 1)};
  std::int32_t burn_in_days = 365;
  std::array<double, 24> weekday_profile{};
  std::array<double, 24> weekend_profile{};
  std::vector<HazardSpec> hazards;
  std::vector<PoissonSpec> operations;
  WeatherParams weather;
  unsigned threads = 1;

  /// Defaults with bimodal weekday and afternoon-heavy weekend profiles.
  static SimConfig defaults();
  /// Throws UsageError on an infeasible configuration.
  void validate() const;
};

/// Overrides defaults from keys such as `seed`, `stations`, `start`, `end`,
/// `mechanical.bikes`, `electric.speed_kmh`, `hazard.brake_pads.shape`,
/// `operation.cleaning.rate_per_day`, `weather.temp_mean` and
/// `weekday_profile` (24 comma-separated weights).
SimConfig sim_config_from(const KeyValueConfig& cfg);

struct GroundTruth {
  std::string unit_id;  // bike:component:k, matching the unit builder's numbering
  std::string bike_id;
  std::string component;
  double true_scale = 0.0;
  double true_shape = 0.0;
  double true_expected_days = 0.0;
  Date installed;
  std::int32_t lifetime_days = 0;  // realized, may run past the window end
};

struct DistanceRow {
  std::string origin;
  std::string dest;
  double meters = 0.0;
};

struct Bundle {
  std::vector<ingest::Station> stations;
  std::vector<DistanceRow> distances;
  std::vector<ingest::WeatherDay> weather;
  std::vector<ingest::Trip> trips;
  std::vector<ingest::MaintenanceOp> maintenance;
  std::vector<GroundTruth> ground_truth;
  std::vector<std::string> fleet;
  /// Simulated in-window failures per (component, bike).
  std::map<std::string, std::map<std::string, std::size_t>> failures;
};

Bundle simulate_fleet(const SimConfig& config);

/// One Weibull lifetime rounded to whole days, at least one.
std::int32_t draw_lifetime(Rng& rng, double shape, double scale);

/// Writes trips.csv, stations.csv, maintenance.csv, distances.csv,
/// weather.csv and ground_truth.csv into `dir` (created if missing).
void write_bundle(const Bundle& bundle, const std::string& dir);

std::vector<GroundTruth> read_ground_truth(const std::string& path);

struct CalibrationBin {
  std::size_t count = 0;
  double mean_predicted = 0.0;
  double mean_true = 0.0;
};

struct OracleReport {
  std::size_t n = 0;
  double rmse = 0.0;
  double r2 = 0.0;
  double constant_rmse = 0.0;  // grand-mean predictor
  std::vector<CalibrationBin> deciles;
};

/// Compares predictions keyed by unit id against the true expected
/// lifetimes. Every predicted id must be present in the ground truth.
OracleReport oracle_report(const std::vector<GroundTruth>& truth,
                           const std::map<std::string, double>& predictions);

std::string oracle_json(const OracleReport& report);

}  // namespace fleetsurv::sim
