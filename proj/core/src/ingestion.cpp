#include "fleetsurv/ingestion.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include <fmt/format.h>

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv::ingest {
namespace {

// Aborts the whole load instead of rejecting one row.
class FatalRowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void check_exists(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path);
}

void reject(LoadReport& report, std::size_t line, std::string message) {
  ++report.rejected;
  report.diagnostics.push_back({line, std::move(message)});
}

void enforce_reject_rate(const LoadReport& report, double max_rate) {
  if (report.reject_rate() > max_rate) {
    std::string first;
    if (!report.diagnostics.empty()) {
      first = fmt::format("; first: line {}: {}", report.diagnostics.front().line,
                          report.diagnostics.front().message);
    }
    throw DataError(fmt::format("{}: {} of {} rows rejected ({:.2f}% > {:.2f}%){}", report.path,
                                report.rejected, report.rows(), 100.0 * report.reject_rate(),
                                100.0 * max_rate, first));
  }
}

void warn_if_empty(LoadReport& report) {
  if (report.rows() == 0) report.warnings.push_back(report.path + ": no data rows");
}

// Runs `parse_row` on every data line; a DataError thrown from it becomes a
// row-level diagnostic.
template <typename Fn>
LoadReport for_each_row(const std::string& path, std::string_view header, std::size_t columns,
                        Fn&& parse_row) {
  check_exists(path);
  csv::LineReader reader(path);
  csv::expect_header(reader, header);
  LoadReport report;
  report.path = path;
  std::string line;
  while (reader.next(line)) {
    if (line.empty()) {
      reject(report, reader.line_number(), "empty line");
      continue;
    }
    const auto fields = csv::split(line);
    if (fields.size() != columns) {
      reject(report, reader.line_number(),
             fmt::format("expected {} fields, found {}", columns, fields.size()));
      continue;
    }
    try {
      parse_row(fields, reader.line_number());
      ++report.parsed;
    } catch (const FatalRowError& e) {
      throw DataError(fmt::format("{}:{}: {}", path, reader.line_number(), e.what()));
    } catch (const DataError& e) {
      reject(report, reader.line_number(), e.what());
    }
  }
  return report;
}

void require_nonempty(std::string_view field, const char* name) {
  if (field.empty()) throw DataError(std::string("empty ") + name);
}

}  // namespace

BikeModel parse_bike_model(std::string_view token) {
  if (token == "M") return BikeModel::kMechanical;
  if (token == "E") return BikeModel::kElectric;
  throw DataError("invalid bike_model '" + std::string(token) + "' (expected M or E)");
}

std::string_view to_token(BikeModel model) { return model == BikeModel::kElectric ? "E" : "M"; }

TripLoad load_trips(const std::string& path, const IngestOptions& options) {
  TripLoad out;
  out.report = for_each_row(path, kTripsHeader, 8, [&](const auto& f, std::size_t) {
    require_nonempty(f[0], "trip_id");
    require_nonempty(f[1], "bike_id");
    require_nonempty(f[4], "start_station");
    require_nonempty(f[5], "end_station");
    Trip trip;
    trip.bike_model = parse_bike_model(f[2]);
    trip.start_time = Timestamp::parse(f[6]);
    trip.end_time = Timestamp::parse(f[7]);
    if (trip.end_time < trip.start_time) {
      throw DataError("end_time " + std::string(f[7]) + " precedes start_time " + std::string(f[6]));
    }
    trip.trip_id = f[0];
    trip.bike_id = f[1];
    trip.user_id = f[3];
    trip.start_station = f[4];
    trip.end_station = f[5];
    out.trips.push_back(std::move(trip));
  });
  warn_if_empty(out.report);
  enforce_reject_rate(out.report, options.max_reject_rate);
  return out;
}

MaintenanceLoad load_maintenance(const std::string& path, const IngestOptions& options) {
  MaintenanceLoad out;
  std::unordered_set<std::string> seen;
  out.report = for_each_row(path, kMaintenanceHeader, 6, [&](const auto& f, std::size_t) {
    require_nonempty(f[0], "mo_id");
    require_nonempty(f[3], "subcategory");
    require_nonempty(f[4], "bike_id");
    MaintenanceOp op;
    op.date = Date::parse(f[1]);
    op.bike_model = parse_bike_model(f[5]);
    if (options.study_window && !options.study_window->contains(op.date)) {
      throw DataError("date " + op.date.to_string() + " outside study window");
    }
    op.mo_id = f[0];
    if (!seen.insert(op.mo_id).second) {
      throw FatalRowError("duplicate mo_id " + op.mo_id);
    }
    op.category = f[2];
    op.subcategory = f[3];
    op.bike_id = f[4];
    out.ops.push_back(std::move(op));
  });
  for (const auto& op : out.ops) {
    ++out.category_counts[op.category];
    ++out.subcategory_counts[{op.category, op.subcategory}];
  }
  warn_if_empty(out.report);
  enforce_reject_rate(out.report, options.max_reject_rate);
  return out;
}

StationTable::StationTable(std::vector<Station> stations) : stations_(std::move(stations)) {
  index_.reserve(stations_.size());
  for (std::size_t i = 0; i < stations_.size(); ++i) {
    if (!index_.emplace(stations_[i].station_id, i).second) {
      throw DataError("duplicate station_id " + stations_[i].station_id);
    }
  }
}

const Station* StationTable::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &stations_[it->second];
}

const Station& StationTable::at(std::string_view id) const {
  const Station* s = find(id);
  if (s == nullptr) throw DataError("undefined station " + std::string(id));
  return *s;
}

std::string DistanceMatrix::key(std::string_view origin, std::string_view dest) {
  std::string k;
  k.reserve(origin.size() + dest.size() + 1);
  k.append(origin);
  k.push_back('\x1f');
  k.append(dest);
  return k;
}

void DistanceMatrix::insert(const std::string& origin, const std::string& dest, double meters) {
  distances_[key(origin, dest)] = meters;
}

std::optional<double> DistanceMatrix::find(std::string_view origin, std::string_view dest) const {
  const auto it = distances_.find(key(origin, dest));
  if (it == distances_.end()) return std::nullopt;
  return it->second;
}

double DistanceMatrix::at(std::string_view origin, std::string_view dest) const {
  const auto d = find(origin, dest);
  if (!d) {
    throw DataError("no distance for station pair " + std::string(origin) + " -> " + std::string(dest));
  }
  return *d;
}

WeatherSeries::WeatherSeries(std::vector<WeatherDay> days) : days_(std::move(days)) {
  std::sort(days_.begin(), days_.end(),
            [](const WeatherDay& a, const WeatherDay& b) { return a.date < b.date; });
  std::vector<std::string> missing;
  for (std::size_t i = 1; i < days_.size(); ++i) {
    if (days_[i].date == days_[i - 1].date) {
      throw DataError("duplicate weather date " + days_[i].date.to_string());
    }
    for (Date d = days_[i - 1].date + 1; d < days_[i].date; d = d + 1) missing.push_back(d.to_string());
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += fmt::format(" (+{} more)", missing.size() - 20);
    throw DataError("weather series has missing dates: " + list);
  }
}

const WeatherDay* WeatherSeries::find(Date date) const {
  if (days_.empty() || date < first() || date > last()) return nullptr;
  return &days_[static_cast<std::size_t>(date - first())];
}

const WeatherDay& WeatherSeries::at(Date date) const {
  const WeatherDay* d = find(date);
  if (d == nullptr) throw DataError("no weather for date " + date.to_string());
  return *d;
}

Providers load_providers(const std::string& stations_path, const std::string& distances_path,
                         const std::string& weather_path, const IngestOptions& options) {
  Providers p;

  std::vector<Station> stations;
  p.station_report = for_each_row(stations_path, kStationsHeader, 4, [&](const auto& f, std::size_t) {
    require_nonempty(f[0], "station_id");
    Station s;
    s.station_id = f[0];
    s.lat = csv::parse_double(f[1]);
    s.lon = csv::parse_double(f[2]);
    s.altitude_m = csv::parse_double(f[3]);
    if (!std::isfinite(s.lat) || !std::isfinite(s.lon) || !std::isfinite(s.altitude_m)) {
      throw DataError("non-finite coordinate or altitude");
    }
    stations.push_back(std::move(s));
  });
  enforce_reject_rate(p.station_report, options.max_reject_rate);
  p.stations = StationTable(std::move(stations));

  std::set<std::string> undefined;
  p.distance_report = for_each_row(distances_path, kDistancesHeader, 3, [&](const auto& f, std::size_t) {
    const std::string origin(f[0]);
    const std::string dest(f[1]);
    if (!p.stations.contains(origin)) undefined.insert(origin);
    if (!p.stations.contains(dest)) undefined.insert(dest);
    const double meters = csv::parse_double(f[2]);
    if (!std::isfinite(meters) || meters <= 0.0) {
      throw DataError(fmt::format("distance {} -> {} must be positive, got {}", origin, dest, f[2]));
    }
    p.distances.insert(origin, dest, meters);
  });
  if (!undefined.empty()) {
    std::string list;
    for (const auto& id : undefined) list += (list.empty() ? "" : ", ") + id;
    throw DataError("undefined station " + list + " referenced in " + distances_path);
  }
  enforce_reject_rate(p.distance_report, options.max_reject_rate);

  std::vector<WeatherDay> days;
  p.weather_report = for_each_row(weather_path, kWeatherHeader, 6, [&](const auto& f, std::size_t) {
    WeatherDay d;
    d.date = Date::parse(f[0]);
    d.temp_c = csv::parse_double(f[1]);
    d.precip_mm = csv::parse_double(f[2]);
    d.wind_dir_deg = csv::parse_double(f[3]);
    d.wind_speed_kmh = csv::parse_double(f[4]);
    d.pressure_hpa = csv::parse_double(f[5]);
    if (!std::isfinite(d.temp_c) || !std::isfinite(d.pressure_hpa) || !std::isfinite(d.precip_mm)) {
      throw DataError("non-finite weather value");
    }
    days.push_back(d);
  });
  enforce_reject_rate(p.weather_report, options.max_reject_rate);
  p.weather = WeatherSeries(std::move(days));
  if (options.study_window) {
    const auto& w = *options.study_window;
    std::vector<std::string> missing;
    for (Date d = w.start; d < w.end; d = d + 1) {
      if (p.weather.find(d) == nullptr) missing.push_back(d.to_string());
    }
    if (!missing.empty()) {
      throw DataError(fmt::format("weather does not cover study window: missing {} day(s) starting {}",
                                  missing.size(), missing.front()));
    }
  }
  return p;
}

}  // namespace fleetsurv::ingest
