#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fleetsurv/dates.hpp"
#include "fleetsurv/ingestion.hpp"
#include "fleetsurv/stats.hpp"

namespace fleetsurv::mobility {

using ingest::BikeModel;
using ingest::Trip;

inline constexpr std::size_t kModels = 2;
inline constexpr std::size_t index_of(BikeModel m) { return static_cast<std::size_t>(m); }

struct DurationBounds {
  double min_minutes = 2.0;  // inclusive
  double max_minutes = 60.0; // inclusive
};

struct FilterResult {
  std::vector<Trip> trips;
  std::size_t input_count = 0;
  [[nodiscard]] double retained_fraction() const {
    return input_count == 0 ? 0.0 : static_cast<double>(trips.size()) / static_cast<double>(input_count);
  }
};

FilterResult filter_trips(std::span<const Trip> trips, DurationBounds bounds = {});

struct TripMetrics {
  std::size_t trip_index = 0;  // into the trip span passed to enrich_trips
  double duration_min = 0.0;
  double distance_m = 0.0;
  double speed_kmh = 0.0;
  double elevation_m = 0.0;  // destination altitude minus origin altitude
};

struct TripDiagnostic {
  std::string trip_id;
  std::string message;
};

struct EnrichResult {
  std::vector<TripMetrics> metrics;
  std::vector<TripDiagnostic> skipped;
};

/// Trips whose stations are unknown or whose directed station pair has no
/// positive distance are skipped with a diagnostic.
EnrichResult enrich_trips(std::span<const Trip> trips, const ingest::DistanceMatrix& distances,
                          const ingest::StationTable& stations);

struct StationFlow {
  std::string station_id;
  double altitude_m = 0.0;
  std::array<std::size_t, kModels> incoming{};
  std::array<std::size_t, kModels> outgoing{};
  // Undefined (nullopt) when the station has no traffic in that direction.
  std::array<std::optional<double>, kModels> incoming_pct;
  std::array<std::optional<double>, kModels> outgoing_pct;
  std::optional<double> incoming_diff;  // electric% - mechanical%, incoming
  std::optional<double> outgoing_diff;  // electric% - mechanical%, outgoing
  std::array<std::optional<double>, kModels> in_out_diff;  // incoming% - outgoing% per model
};

struct FlowTable {
  std::string label;
  std::vector<StationFlow> rows;  // one per station, station-table order
  std::size_t trips_counted = 0;
  std::size_t trips_unknown_station = 0;
};

FlowTable station_flows(std::span<const Trip> trips, const ingest::StationTable& stations);

struct ElevationBucket {
  double lo = -std::numeric_limits<double>::infinity();  // inclusive
  double hi = std::numeric_limits<double>::infinity();   // exclusive
  [[nodiscard]] bool contains(double v) const { return v >= lo && v < hi; }
  [[nodiscard]] std::string label() const;
};

/// Parses "lo:hi,lo:hi,..." with "inf"/"-inf" accepted.
std::vector<ElevationBucket> parse_buckets(const std::string& text);

/// One flow table per bucket, built from the enriched trips whose elevation
/// falls in it. Throws UsageError for overlapping buckets.
std::vector<FlowTable> elevation_flows(std::span<const Trip> trips,
                                       std::span<const TripMetrics> metrics,
                                       const ingest::StationTable& stations,
                                       std::span<const ElevationBucket> buckets);

struct TemporalProfile {
  // [weekday][hour], weekday 0 = Monday; statistics over every calendar day
  // of that weekday in the covered date range.
  std::array<std::array<double, 24>, 7> mean{};
  std::array<std::array<double, 24>, 7> stddev{};
  std::array<std::size_t, 7> weekday_days{};

  struct WeekTotal {
    Date week_start;  // Monday
    std::array<std::size_t, kModels> trips{};
  };
  std::vector<WeekTotal> weekly;

  struct DailyUsage {
    Date date;
    std::array<std::size_t, kModels> trips{};
    std::array<std::size_t, kModels> active_bikes{};
    std::array<std::optional<double>, kModels> trips_per_bike;
  };
  std::vector<DailyUsage> daily;
};

TemporalProfile temporal_profile(std::span<const Trip> trips);

void write_flow_csv(std::ostream& out, std::span<const FlowTable> tables);
void write_profile_csv(std::ostream& out, const TemporalProfile& profile);
void write_weekly_csv(std::ostream& out, const TemporalProfile& profile);
void write_daily_csv(std::ostream& out, const TemporalProfile& profile);

/// {"test","statistic","p_value","alpha","significant"}
std::string test_result_json(const stats::TestResult& result);

}  // namespace fleetsurv::mobility
