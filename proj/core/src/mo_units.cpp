#include "fleetsurv/mo_units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <unordered_map>

#include <fmt/format.h>
#include "json.hpp"

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv::units {
namespace {

struct DatedIndex {
  Date date;
  std::size_t index;
  friend bool operator<(const DatedIndex& a, const DatedIndex& b) {
    return a.date != b.date ? a.date < b.date : a.index < b.index;
  }
};

// Entries of `sorted` that belong to the unit: (start, end], or [start, end]
// for a unit opening at the window start.
std::span<const DatedIndex> in_unit(const std::vector<DatedIndex>& sorted, const MOUnit& unit,
                                    DateWindow window) {
  auto by_date = [](const DatedIndex& a, Date d) { return a.date < d; };
  auto first = unit.start_date == window.start
                   ? std::lower_bound(sorted.begin(), sorted.end(), unit.start_date, by_date)
                   : std::lower_bound(sorted.begin(), sorted.end(), unit.start_date + 1, by_date);
  auto last = std::lower_bound(first, sorted.end(), unit.end_date + 1, by_date);
  return {first, last};
}

}  // namespace

Component component_from_name(const std::string& name) {
  static const std::map<std::string, std::string> known = {
      {"brake_pads", "brake_pads_change"},
      {"wheel_spokes", "wheel_spokes_change"},
      {"chain", "chain_change"},
  };
  static const std::set<std::string> excluded = {"front_tube_change", "rear_tube_change", "cleaning", "greasing"};
  if (name.empty()) throw UsageError("component name is empty");
  if (auto it = known.find(name); it != known.end()) return {name, it->second};
  if (excluded.contains(name)) throw UsageError("'" + name + "' cannot be used as a survival target");
  return {name, name};
}

std::string_view to_string(CensorClass c) {
  switch (c) {
    case CensorClass::kUncensored: return "uncensored";
    case CensorClass::kRight: return "right";
    case CensorClass::kLeft: return "left";
  }
  return "?";
}

std::string_view to_string(Exclusion e) {
  switch (e) {
    case Exclusion::kRetained: return "retained";
    case Exclusion::kLeftCensored: return "left_censored";
    case Exclusion::kNoTrips: return "no_trips";
    case Exclusion::kModelChanged: return "model_changed";
  }
  return "?";
}

BuildResult build_mo_units(std::span<const ingest::MaintenanceOp> mos, const Component& component,
                           DateWindow window, std::span<const std::string> fleet) {
  if (window.length() <= 0) throw UsageError("study window is empty");
  struct Repair {
    Date date;
    BikeModel model;
  };
  std::map<std::string, std::vector<Repair>> per_bike;
  for (const auto& id : fleet) per_bike[id];
  for (const auto& op : mos) {
    if (op.subcategory != component.subcategory) continue;
    if (!window.contains(op.date)) {
      throw DataError("repair " + op.mo_id + " dated " + op.date.to_string() + " is outside the study window");
    }
    per_bike[op.bike_id].push_back({op.date, op.bike_model});
  }

  BuildResult out;
  out.bikes = per_bike.size();
  for (auto& [bike, repairs] : per_bike) {
    std::stable_sort(repairs.begin(), repairs.end(), [](const Repair& a, const Repair& b) { return a.date < b.date; });
    std::vector<Repair> days;
    for (const auto& r : repairs) {
      if (!days.empty() && days.back().date == r.date) {
        out.warnings.push_back(fmt::format("bike {}: repeated {} repair on {} collapsed to one", bike, component.name,
                                           r.date.to_string()));
        continue;
      }
      days.push_back(r);
    }
    out.repairs += days.size();
    auto add = [&](Date s, Date e, CensorClass c, std::optional<BikeModel> model) {
      MOUnit u;
      u.bike_id = bike;
      u.component = component.name;
      u.index = out.units.empty() || out.units.back().bike_id != bike ? 0 : out.units.back().index + 1;
      u.unit_id = fmt::format("{}:{}:{}", bike, component.name, u.index);
      u.start_date = s;
      u.end_date = e;
      u.duration = e - s;
      u.event = c == CensorClass::kUncensored;
      u.censor_class = c;
      u.bike_model = model;
      out.units.push_back(std::move(u));
    };
    if (days.empty()) {
      add(window.start, window.end, CensorClass::kRight, std::nullopt);
      continue;
    }
    add(window.start, days.front().date, CensorClass::kLeft, days.front().model);
    for (std::size_t i = 1; i < days.size(); ++i) {
      add(days[i - 1].date, days[i].date, CensorClass::kUncensored, days[i].model);
    }
    add(days.back().date, window.end, CensorClass::kRight, days.back().model);
  }
  return out;
}

std::vector<std::string> feature_names(const CovariateOptions& options) {
  std::vector<std::string> names = {"cumulative_distance", "mean_speed", "bike_model", "mean_daily_temp",
                                    "mean_pressure"};
  if (options.include_wind) {
    names.emplace_back("mean_wind_speed");
    names.emplace_back("mean_wind_dir");
  }
  for (const auto& s : options.count_subcategories) names.push_back("count_" + s);
  return names;
}

AttachResult attach_covariates(std::span<MOUnit> units, std::span<const ingest::Trip> trips,
                               std::span<const mobility::TripMetrics> metrics,
                               const ingest::WeatherSeries& weather,
                               std::span<const ingest::MaintenanceOp> all_mos, DateWindow window,
                               const CovariateOptions& options) {
  std::unordered_map<std::string_view, std::vector<DatedIndex>> trips_by_bike;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const auto& trip = trips[metrics[i].trip_index];
    const Date d = trip.start_time.date();
    if (!window.contains(d)) continue;
    trips_by_bike[trip.bike_id].push_back({d, i});
  }
  for (auto& [bike, list] : trips_by_bike) std::sort(list.begin(), list.end());

  std::unordered_map<std::string, std::size_t> count_column;
  for (std::size_t c = 0; c < options.count_subcategories.size(); ++c) {
    count_column.emplace(options.count_subcategories[c], c);
  }
  std::unordered_map<std::string_view, std::vector<DatedIndex>> ops_by_bike;
  for (std::size_t i = 0; i < all_mos.size(); ++i) {
    if (count_column.contains(all_mos[i].subcategory)) ops_by_bike[all_mos[i].bike_id].push_back({all_mos[i].date, i});
  }
  for (auto& [bike, list] : ops_by_bike) std::sort(list.begin(), list.end());

  AttachResult out;
  out.counts.built = units.size();
  out.status.assign(units.size(), Exclusion::kRetained);
  out.trip_count.assign(units.size(), 0);
  const auto names = feature_names(options);
  const std::size_t base = options.include_wind ? 7 : 5;
  std::vector<std::vector<double>> rows;
  const std::vector<DatedIndex> none;

  for (std::size_t u = 0; u < units.size(); ++u) {
    MOUnit& unit = units[u];
    const auto tb = trips_by_bike.find(unit.bike_id);
    const auto unit_trips = in_unit(tb == trips_by_bike.end() ? none : tb->second, unit, window);
    out.trip_count[u] = unit_trips.size();

    std::set<BikeModel> models;
    for (const auto& t : unit_trips) models.insert(trips[metrics[t.index].trip_index].bike_model);
    if (models.size() == 1) unit.bike_model = *models.begin();

    if (unit.censor_class == CensorClass::kLeft) {
      out.status[u] = Exclusion::kLeftCensored;
      ++out.counts.left_censored;
      continue;
    }
    if (unit_trips.empty()) {
      out.status[u] = Exclusion::kNoTrips;
      ++out.counts.no_trips;
      continue;
    }
    if (models.size() > 1) {
      out.status[u] = Exclusion::kModelChanged;
      ++out.counts.model_changed;
      continue;
    }

    std::vector<double> row(names.size(), 0.0);
    double distance = 0.0;
    double speed_sum = 0.0;
    double minutes = 0.0;
    for (const auto& t : unit_trips) {
      const auto& m = metrics[t.index];
      distance += m.distance_m;
      speed_sum += m.speed_kmh;
      minutes += m.duration_min;
    }
    row[0] = distance;
    row[1] = options.speed_mean == SpeedMean::kTrip ? speed_sum / static_cast<double>(unit_trips.size())
                                                    : (distance / 1000.0) / (minutes / 60.0);
    row[2] = *unit.bike_model == BikeModel::kElectric ? 1.0 : 0.0;

    double temp = 0.0;
    double pressure = 0.0;
    double wind = 0.0;
    double wx = 0.0;
    double wy = 0.0;
    for (Date d = unit.start_date; d < unit.end_date; d = d + 1) {
      const auto& w = weather.at(d);
      temp += w.temp_c;
      pressure += w.pressure_hpa;
      wind += w.wind_speed_kmh;
      wx += std::cos(w.wind_dir_deg * std::numbers::pi / 180.0);
      wy += std::sin(w.wind_dir_deg * std::numbers::pi / 180.0);
    }
    const auto days = static_cast<double>(unit.duration);
    row[3] = temp / days;
    row[4] = pressure / days;
    if (options.include_wind) {
      row[5] = wind / days;
      double dir = std::atan2(wy, wx) * 180.0 / std::numbers::pi;
      row[6] = dir < 0 ? dir + 360.0 : dir;
    }
    const auto ob = ops_by_bike.find(unit.bike_id);
    for (const auto& o : in_unit(ob == ops_by_bike.end() ? none : ob->second, unit, window)) {
      row[base + count_column.at(all_mos[o.index].subcategory)] += 1.0;
    }
    rows.push_back(std::move(row));
    out.retained.push_back(u);
  }
  out.counts.retained = out.retained.size();

  auto& data = out.dataset;
  data.feature_names = names;
  const auto n = static_cast<Eigen::Index>(rows.size());
  data.x.resize(n, static_cast<Eigen::Index>(names.size()));
  data.duration.resize(n);
  data.event.resize(rows.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& unit = units[out.retained[static_cast<std::size_t>(r)]];
    for (std::size_t c = 0; c < names.size(); ++c) {
      data.x(r, static_cast<Eigen::Index>(c)) = rows[static_cast<std::size_t>(r)][c];
    }
    data.duration[r] = unit.duration;
    data.event[static_cast<std::size_t>(r)] = unit.event ? 1 : 0;
    data.row_ids.push_back(unit.unit_id);
  }
  return out;
}

namespace {

DatasetSummary tabulate(const std::array<std::array<std::size_t, 2>, 3>& counts) {
  DatasetSummary s;
  for (const auto& c : counts) s.total += c[0] + c[1];
  for (std::size_t k = 0; k < 3; ++k) {
    SummaryRow row;
    row.censor_class = static_cast<CensorClass>(k);
    row.count = counts[k];
    for (std::size_t m = 0; m < 2; ++m) {
      row.percent[m] = s.total == 0 ? 0.0 : 100.0 * static_cast<double>(counts[k][m]) / static_cast<double>(s.total);
    }
    s.rows.push_back(row);
  }
  return s;
}

}  // namespace

DatasetSummary dataset_summary(std::span<const MOUnit> units, std::span<const Exclusion> status) {
  std::array<std::array<std::size_t, 2>, 3> counts{};
  ExclusionCounts ex;
  ex.built = units.size();
  std::set<std::string_view> bikes;
  std::size_t repairs = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    bikes.insert(u.bike_id);
    if (u.censor_class != CensorClass::kRight) ++repairs;  // every non-final unit closes on a repair
    const auto st = status.empty() ? Exclusion::kRetained : status[i];
    switch (st) {
      case Exclusion::kRetained: ++ex.retained; break;
      case Exclusion::kLeftCensored: ++ex.left_censored; break;
      case Exclusion::kNoTrips: ++ex.no_trips; break;
      case Exclusion::kModelChanged: ++ex.model_changed; break;
    }
    if (!status.empty() && st != Exclusion::kRetained) continue;
    const auto m = u.bike_model.value_or(BikeModel::kMechanical) == BikeModel::kElectric ? 1 : 0;
    ++counts[static_cast<std::size_t>(u.censor_class)][static_cast<std::size_t>(m)];
  }
  auto s = tabulate(counts);
  if (!units.empty()) s.component = units.front().component;
  s.repairs = repairs;
  s.bikes = bikes.size();
  s.exclusions = ex;
  return s;
}

DatasetSummary dataset_summary(const SurvivalDataset& data) {
  std::array<std::array<std::size_t, 2>, 3> counts{};
  const auto it = std::find(data.feature_names.begin(), data.feature_names.end(), "bike_model");
  const auto col = it == data.feature_names.end() ? -1 : static_cast<Eigen::Index>(it - data.feature_names.begin());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto k = data.event[i] ? 0 : 1;
    const auto m = col >= 0 && data.x(static_cast<Eigen::Index>(i), col) > 0.5 ? 1 : 0;
    ++counts[static_cast<std::size_t>(k)][static_cast<std::size_t>(m)];
  }
  auto s = tabulate(counts);
  s.exclusions.built = s.exclusions.retained = data.rows();
  return s;
}

std::string manifest_json(const DatasetSummary& summary, DateWindow window,
                          const std::vector<std::string>& features, const CovariateOptions& options) {
  nlohmann::ordered_json j;
  j["component"] = summary.component;
  j["window"] = {{"start", window.start.to_string()}, {"end", window.end.to_string()}};
  j["features"] = features;
  j["mean_speed"] = options.speed_mean == SpeedMean::kTrip ? "trip" : "distance_weighted";
  j["repairs"] = summary.repairs;
  j["bikes"] = summary.bikes;
  j["units_built"] = summary.exclusions.built;
  j["exclusions"] = {{"left_censored", summary.exclusions.left_censored},
                     {"no_trips", summary.exclusions.no_trips},
                     {"model_changed", summary.exclusions.model_changed}};
  j["retained"] = summary.exclusions.retained;
  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  for (const auto& r : summary.rows) {
    table.push_back({{"censor_class", to_string(r.censor_class)},
                     {"mechanical", r.count[0]},
                     {"electric", r.count[1]},
                     {"mechanical_pct", r.percent[0]},
                     {"electric_pct", r.percent[1]}});
  }
  j["by_censor_class"] = table;
  return j.dump(2);
}

void write_units_csv(const std::string& path, std::span<const MOUnit> units, std::span<const Exclusion> status) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "unit_id,bike_id,component,start_date,end_date,duration_days,event,censor_class,bike_model,status\n";
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    out << u.unit_id << ',' << u.bike_id << ',' << u.component << ',' << u.start_date.to_string() << ','
        << u.end_date.to_string() << ',' << u.duration << ',' << (u.event ? 1 : 0) << ',' << to_string(u.censor_class)
        << ',' << (u.bike_model ? ingest::to_token(*u.bike_model) : std::string_view()) << ','
        << (status.empty() ? "retained" : to_string(status[i])) << '\n';
  }
}

}  // namespace fleetsurv::units
