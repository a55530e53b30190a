#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fleetsurv/dataset.hpp"
#include "fleetsurv/dates.hpp"
#include "fleetsurv/ingestion.hpp"
#include "fleetsurv/mobility.hpp"

namespace fleetsurv::units {

using ingest::BikeModel;

/// A survival target: a component name and the maintenance subcategory that
/// records its replacement.
struct Component {
  std::string name;
  std::string subcategory;
};

/// brake_pads, wheel_spokes and chain map to their replacement
/// subcategories; any other name is taken as its own subcategory. Tube
/// replacements and subjective operations are rejected as targets.
Component component_from_name(const std::string& name);

enum class CensorClass : std::uint8_t { kUncensored, kRight, kLeft };
std::string_view to_string(CensorClass c);

struct MOUnit {
  std::string unit_id;  // bike:component:k, k counting from the window start
  std::string bike_id;
  std::string component;
  std::size_t index = 0;
  Date start_date;
  Date end_date;
  std::int32_t duration = 0;  // end_date - start_date
  bool event = false;
  CensorClass censor_class = CensorClass::kRight;
  std::optional<BikeModel> bike_model;  // from the opening/closing repair rows, refined by trips
};

struct BuildResult {
  std::vector<MOUnit> units;  // sorted by bike_id then start_date
  std::size_t repairs = 0;    // distinct (bike, day) repairs after collapsing
  std::size_t bikes = 0;
  std::vector<std::string> warnings;
};

/// Tiles the window [start, end) per bike of `fleet`: LEFT up to the first
/// repair, UNCENSORED between repairs, RIGHT from the last one to the window
/// end. Operations whose subcategory is not the component's are ignored.
/// Bikes with maintenance rows but absent from `fleet` are added.
BuildResult build_mo_units(std::span<const ingest::MaintenanceOp> mos, const Component& component,
                           DateWindow window, std::span<const std::string> fleet = {});

enum class SpeedMean : std::uint8_t { kTrip, kDistanceWeighted };

struct CovariateOptions {
  /// Subcategories counted as covariates, emitted as count_<subcategory>.
  std::vector<std::string> count_subcategories = {"brake_tension_adjust", "front_tube_change",
                                                  "rear_tube_change", "front_cover_change"};
  SpeedMean speed_mean = SpeedMean::kTrip;
  bool include_wind = false;
};

enum class Exclusion : std::uint8_t { kRetained, kLeftCensored, kNoTrips, kModelChanged };
std::string_view to_string(Exclusion e);

struct ExclusionCounts {
  std::size_t built = 0;
  std::size_t retained = 0;
  std::size_t left_censored = 0;
  std::size_t no_trips = 0;
  std::size_t model_changed = 0;
  [[nodiscard]] bool reconciles() const {
    return built == retained + left_censored + no_trips + model_changed;
  }
};

struct AttachResult {
  SurvivalDataset dataset;
  std::vector<Exclusion> status;       // one per input unit
  std::vector<std::size_t> retained;   // input unit index of each dataset row
  std::vector<std::size_t> trip_count; // per input unit
  ExclusionCounts counts;
};

/// Aggregates enriched trips, weather and the other maintenance operations
/// over each unit, then applies the exclusions in order: left-censored,
/// no trips, bike model changed. A trip or operation dated d belongs to the
/// unit with start < d <= end (the first unit of a bike also takes d ==
/// start), so same-day trips count before the repair.
AttachResult attach_covariates(std::span<MOUnit> units, std::span<const ingest::Trip> trips,
                               std::span<const mobility::TripMetrics> metrics,
                               const ingest::WeatherSeries& weather,
                               std::span<const ingest::MaintenanceOp> all_mos, DateWindow window,
                               const CovariateOptions& options = {});

/// Feature names in emission order for the given options.
std::vector<std::string> feature_names(const CovariateOptions& options);

struct SummaryRow {
  CensorClass censor_class = CensorClass::kUncensored;
  std::array<std::size_t, 2> count{};   // by bike model
  std::array<double, 2> percent{};      // of all rows in the table
};

struct DatasetSummary {
  std::string component;
  std::vector<SummaryRow> rows;  // uncensored, right, left
  std::size_t total = 0;
  std::size_t repairs = 0;
  std::size_t bikes = 0;
  ExclusionCounts exclusions;
};

/// Counts by censor class and bike model. Units without a known model are
/// counted as mechanical.
DatasetSummary dataset_summary(std::span<const MOUnit> units, std::span<const Exclusion> status = {});
DatasetSummary dataset_summary(const SurvivalDataset& data);

std::string manifest_json(const DatasetSummary& summary, DateWindow window,
                          const std::vector<std::string>& features, const CovariateOptions& options);

/// Sidecar with every built unit and its exclusion status.
void write_units_csv(const std::string& path, std::span<const MOUnit> units, std::span<const Exclusion> status);

}  // namespace fleetsurv::units
