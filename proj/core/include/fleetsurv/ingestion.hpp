#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "fleetsurv/dates.hpp"

namespace fleetsurv::ingest {

enum class BikeModel : std::uint8_t { kMechanical = 0, kElectric = 1 };

/// "M" -> mechanical, "E" -> electric; anything else throws DataError.
BikeModel parse_bike_model(std::string_view token);
std::string_view to_token(BikeModel model);

inline constexpr std::string_view kTripsHeader =
    "trip_id,bike_id,bike_model,user_id,start_station,end_station,start_time,end_time";
inline constexpr std::string_view kStationsHeader = "station_id,lat,lon,altitude_m";
inline constexpr std::string_view kMaintenanceHeader =
    "mo_id,date,category,subcategory,bike_id,bike_model";
inline constexpr std::string_view kDistancesHeader = "origin_station,dest_station,distance_m";
inline constexpr std::string_view kWeatherHeader =
    "date,temp_c,precip_mm,wind_dir_deg,wind_speed_kmh,pressure_hpa";

struct Trip {
  std::string trip_id;
  std::string bike_id;
  BikeModel bike_model = BikeModel::kMechanical;
  std::string user_id;
  std::string start_station;
  std::string end_station;
  Timestamp start_time;
  Timestamp end_time;

  [[nodiscard]] double duration_minutes() const {
    return static_cast<double>(end_time.seconds - start_time.seconds) / 60.0;
  }
};

struct Station {
  std::string station_id;
  double lat = 0.0;
  double lon = 0.0;
  double altitude_m = 0.0;
};

struct MaintenanceOp {
  std::string mo_id;
  Date date;
  std::string category;
  std::string subcategory;
  std::string bike_id;
  BikeModel bike_model = BikeModel::kMechanical;
};

struct Diagnostic {
  std::size_t line = 0;
  std::string message;
};

/// Row accounting for one file: parsed + rejected equals the number of
/// data lines (everything after the header).
struct LoadReport {
  std::string path;
  std::size_t parsed = 0;
  std::size_t rejected = 0;
  std::vector<Diagnostic> diagnostics;
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t rows() const { return parsed + rejected; }
  [[nodiscard]] double reject_rate() const {
    return rows() == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(rows());
  }
};

struct IngestOptions {
  /// Loading aborts with DataError once the rejected fraction exceeds this.
  double max_reject_rate = 0.05;
  /// When set, maintenance rows outside the window are rejected and the
  /// weather series must cover every day of it.
  std::optional<DateWindow> study_window;
};

struct TripLoad {
  std::vector<Trip> trips;
  LoadReport report;
};

struct MaintenanceLoad {
  std::vector<MaintenanceOp> ops;
  LoadReport report;
  std::map<std::string, std::size_t> category_counts;
  std::map<std::pair<std::string, std::string>, std::size_t> subcategory_counts;
};

TripLoad load_trips(const std::string& path, const IngestOptions& options = {});
MaintenanceLoad load_maintenance(const std::string& path, const IngestOptions& options = {});

class StationTable {
 public:
  StationTable() = default;
  explicit StationTable(std::vector<Station> stations);  // throws on duplicate ids

  [[nodiscard]] const Station* find(std::string_view id) const;
  [[nodiscard]] const Station& at(std::string_view id) const;  // throws DataError
  [[nodiscard]] bool contains(std::string_view id) const { return find(id) != nullptr; }
  [[nodiscard]] const std::vector<Station>& stations() const { return stations_; }
  [[nodiscard]] std::size_t size() const { return stations_.size(); }

 private:
  std::vector<Station> stations_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Directed shortest-path distances in meters. distance(a, b) need not
/// equal distance(b, a); a missing pair is never treated as zero.
class DistanceMatrix {
 public:
  void insert(const std::string& origin, const std::string& dest, double meters);

  [[nodiscard]] std::optional<double> find(std::string_view origin, std::string_view dest) const;
  [[nodiscard]] double at(std::string_view origin, std::string_view dest) const;  // throws DataError
  [[nodiscard]] std::size_t size() const { return distances_.size(); }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [key, meters] : distances_) {
      const auto sep = key.find('\x1f');
      fn(std::string_view(key).substr(0, sep), std::string_view(key).substr(sep + 1), meters);
    }
  }

 private:
  static std::string key(std::string_view origin, std::string_view dest);
  std::unordered_map<std::string, double> distances_;
};

struct WeatherDay {
  Date date;
  double temp_c = 0.0;
  double precip_mm = 0.0;
  double wind_dir_deg = 0.0;
  double wind_speed_kmh = 0.0;
  double pressure_hpa = 0.0;
};

/// Contiguous daily weather; construction fails on duplicates or gaps.
class WeatherSeries {
 public:
  WeatherSeries() = default;
  explicit WeatherSeries(std::vector<WeatherDay> days);

  [[nodiscard]] const WeatherDay* find(Date date) const;
  [[nodiscard]] const WeatherDay& at(Date date) const;  // throws DataError
  [[nodiscard]] bool empty() const { return days_.empty(); }
  [[nodiscard]] Date first() const { return days_.front().date; }
  [[nodiscard]] Date last() const { return days_.back().date; }
  [[nodiscard]] const std::vector<WeatherDay>& days() const { return days_; }

 private:
  std::vector<WeatherDay> days_;
};

struct Providers {
  StationTable stations;
  DistanceMatrix distances;
  WeatherSeries weather;
  LoadReport station_report;
  LoadReport distance_report;
  LoadReport weather_report;
};

Providers load_providers(const std::string& stations_path, const std::string& distances_path,
                         const std::string& weather_path, const IngestOptions& options = {});

}  // namespace fleetsurv::ingest
