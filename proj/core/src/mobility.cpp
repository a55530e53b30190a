#include "fleetsurv/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include "json.hpp"

#include "fleetsurv/csv.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv::mobility {
namespace {

std::optional<double> share(std::size_t part, std::size_t total) {
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(part) / static_cast<double>(total);
}

std::optional<double> difference(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

void finalize(StationFlow& row) {
  const std::size_t in_total = row.incoming[0] + row.incoming[1];
  const std::size_t out_total = row.outgoing[0] + row.outgoing[1];
  for (std::size_t m = 0; m < kModels; ++m) {
    row.incoming_pct[m] = share(row.incoming[m], in_total);
    row.outgoing_pct[m] = share(row.outgoing[m], out_total);
  }
  constexpr auto e = index_of(BikeModel::kElectric);
  constexpr auto mech = index_of(BikeModel::kMechanical);
  row.incoming_diff = difference(row.incoming_pct[e], row.incoming_pct[mech]);
  row.outgoing_diff = difference(row.outgoing_pct[e], row.outgoing_pct[mech]);
  for (std::size_t m = 0; m < kModels; ++m) {
    row.in_out_diff[m] = difference(row.incoming_pct[m], row.outgoing_pct[m]);
  }
}

// Builds a table from the trips selected by `keep(i)`.
template <typename Keep>
FlowTable build_flows(std::span<const Trip> trips, const ingest::StationTable& stations, Keep&& keep) {
  FlowTable table;
  table.rows.resize(stations.size());
  std::unordered_map<std::string_view, std::size_t> index;
  index.reserve(stations.size());
  for (std::size_t i = 0; i < stations.size(); ++i) {
    table.rows[i].station_id = stations.stations()[i].station_id;
    table.rows[i].altitude_m = stations.stations()[i].altitude_m;
    index.emplace(stations.stations()[i].station_id, i);
  }
  for (std::size_t i = 0; i < trips.size(); ++i) {
    if (!keep(i)) continue;
    const Trip& t = trips[i];
    const auto from = index.find(t.start_station);
    const auto to = index.find(t.end_station);
    if (from == index.end() || to == index.end()) {
      ++table.trips_unknown_station;
      continue;
    }
    ++table.trips_counted;
    ++table.rows[from->second].outgoing[index_of(t.bike_model)];
    ++table.rows[to->second].incoming[index_of(t.bike_model)];
  }
  for (auto& row : table.rows) finalize(row);
  return table;
}

std::string opt(const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); }

std::string bound(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return csv::format_double(v);
}

}  // namespace

FilterResult filter_trips(std::span<const Trip> trips, DurationBounds bounds) {
  FilterResult out;
  out.input_count = trips.size();
  for (const auto& t : trips) {
    const double d = t.duration_minutes();
    if (d >= bounds.min_minutes && d <= bounds.max_minutes) out.trips.push_back(t);
  }
  return out;
}

EnrichResult enrich_trips(std::span<const Trip> trips, const ingest::DistanceMatrix& distances,
                          const ingest::StationTable& stations) {
  EnrichResult out;
  out.metrics.reserve(trips.size());
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const Trip& t = trips[i];
    const auto* from = stations.find(t.start_station);
    const auto* to = stations.find(t.end_station);
    if (from == nullptr || to == nullptr) {
      out.skipped.push_back({t.trip_id, "undefined station " + (from == nullptr ? t.start_station : t.end_station)});
      continue;
    }
    const auto dist = distances.find(t.start_station, t.end_station);
    if (!dist || *dist <= 0.0) {
      out.skipped.push_back({t.trip_id, "no distance for " + t.start_station + " -> " + t.end_station});
      continue;
    }
    const double minutes = t.duration_minutes();
    if (minutes <= 0.0) {
      out.skipped.push_back({t.trip_id, "zero duration"});
      continue;
    }
    TripMetrics m;
    m.trip_index = i;
    m.duration_min = minutes;
    m.distance_m = *dist;
    m.speed_kmh = (*dist / 1000.0) / (minutes / 60.0);
    m.elevation_m = to->altitude_m - from->altitude_m;
    out.metrics.push_back(m);
  }
  return out;
}

FlowTable station_flows(std::span<const Trip> trips, const ingest::StationTable& stations) {
  auto table = build_flows(trips, stations, [](std::size_t) { return true; });
  table.label = "all";
  return table;
}

std::string ElevationBucket::label() const { return "[" + bound(lo) + "," + bound(hi) + ")"; }

std::vector<ElevationBucket> parse_buckets(const std::string& text) {
  std::vector<ElevationBucket> out;
  for (const auto item : csv::split(text)) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw UsageError("bucket '" + std::string(item) + "' must be lo:hi");
    auto parse_bound = [&](std::string_view s) {
      if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
      if (s == "-inf") return -std::numeric_limits<double>::infinity();
      try {
        return csv::parse_double(s);
      } catch (const DataError&) {
        throw UsageError("bad bucket bound '" + std::string(s) + "'");
      }
    };
    ElevationBucket b{parse_bound(item.substr(0, colon)), parse_bound(item.substr(colon + 1))};
    if (!(b.lo < b.hi)) throw UsageError("bucket " + b.label() + " is empty");
    out.push_back(b);
  }
  return out;
}

std::vector<FlowTable> elevation_flows(std::span<const Trip> trips,
                                       std::span<const TripMetrics> metrics,
                                       const ingest::StationTable& stations,
                                       std::span<const ElevationBucket> buckets) {
  std::vector<ElevationBucket> sorted(buckets.begin(), buckets.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ElevationBucket& a, const ElevationBucket& b) { return a.lo < b.lo; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].lo < sorted[i - 1].hi) {
      throw UsageError("elevation buckets " + sorted[i - 1].label() + " and " + sorted[i].label() + " overlap");
    }
  }
  std::vector<double> elevation(trips.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& m : metrics) elevation.at(m.trip_index) = m.elevation_m;

  std::vector<FlowTable> out;
  for (const auto& bucket : buckets) {
    auto table = build_flows(trips, stations, [&](std::size_t i) {
      return !std::isnan(elevation[i]) && bucket.contains(elevation[i]);
    });
    table.label = bucket.label();
    out.push_back(std::move(table));
  }
  return out;
}

TemporalProfile temporal_profile(std::span<const Trip> trips) {
  TemporalProfile p;
  if (trips.empty()) return p;
  Date first = trips.front().start_time.date();
  Date last = first;
  for (const auto& t : trips) {
    const Date d = t.start_time.date();
    first = std::min(first, d);
    last = std::max(last, d);
  }
  const auto days = static_cast<std::size_t>(last - first + 1);
  std::vector<std::array<std::size_t, 24>> hourly(days);
  std::vector<TemporalProfile::DailyUsage> daily(days);
  std::vector<std::array<std::unordered_set<std::string_view>, kModels>> active(days);
  for (const auto& t : trips) {
    const Date d = t.start_time.date();
    const auto di = static_cast<std::size_t>(d - first);
    ++hourly[di][static_cast<std::size_t>(t.start_time.hour())];
    ++daily[di].trips[index_of(t.bike_model)];
    active[di][index_of(t.bike_model)].insert(t.bike_id);
  }

  std::array<std::array<double, 24>, 7> sum{};
  std::array<std::array<double, 24>, 7> sum_sq{};
  for (std::size_t di = 0; di < days; ++di) {
    const Date d = first + static_cast<std::int32_t>(di);
    const auto w = static_cast<std::size_t>(d.weekday());
    ++p.weekday_days[w];
    for (std::size_t h = 0; h < 24; ++h) {
      const auto c = static_cast<double>(hourly[di][h]);
      sum[w][h] += c;
      sum_sq[w][h] += c * c;
    }
    daily[di].date = d;
    for (std::size_t m = 0; m < kModels; ++m) {
      daily[di].active_bikes[m] = active[di][m].size();
      if (daily[di].active_bikes[m] > 0) {
        daily[di].trips_per_bike[m] =
            static_cast<double>(daily[di].trips[m]) / static_cast<double>(daily[di].active_bikes[m]);
      }
    }
  }
  for (std::size_t w = 0; w < 7; ++w) {
    const auto n = static_cast<double>(p.weekday_days[w]);
    for (std::size_t h = 0; h < 24; ++h) {
      if (n == 0) continue;
      p.mean[w][h] = sum[w][h] / n;
      // Sample standard deviation; a single occurrence has zero spread.
      p.stddev[w][h] = n < 2 ? 0.0
                             : std::sqrt(std::max(0.0, (sum_sq[w][h] - n * p.mean[w][h] * p.mean[w][h]) / (n - 1)));
    }
  }

  std::map<std::int32_t, TemporalProfile::WeekTotal> weeks;
  for (const auto& d : daily) {
    const Date monday = d.date - d.date.weekday();
    auto& wt = weeks[monday.days];
    wt.week_start = monday;
    for (std::size_t m = 0; m < kModels; ++m) wt.trips[m] += d.trips[m];
  }
  for (const auto& [key, wt] : weeks) p.weekly.push_back(wt);
  p.daily = std::move(daily);
  return p;
}

void write_flow_csv(std::ostream& out, std::span<const FlowTable> tables) {
  out << "bucket,station_id,altitude_m,in_m,in_e,out_m,out_e,in_pct_m,in_pct_e,out_pct_m,out_pct_e,"
         "in_diff_e_minus_m,out_diff_e_minus_m,in_out_diff_m,in_out_diff_e\n";
  for (const auto& table : tables) {
    for (const auto& r : table.rows) {
      out << table.label << ',' << r.station_id << ',' << csv::format_double(r.altitude_m) << ','
          << r.incoming[0] << ',' << r.incoming[1] << ',' << r.outgoing[0] << ',' << r.outgoing[1] << ','
          << opt(r.incoming_pct[0]) << ',' << opt(r.incoming_pct[1]) << ',' << opt(r.outgoing_pct[0]) << ','
          << opt(r.outgoing_pct[1]) << ',' << opt(r.incoming_diff) << ',' << opt(r.outgoing_diff) << ','
          << opt(r.in_out_diff[0]) << ',' << opt(r.in_out_diff[1]) << '\n';
    }
  }
}

void write_profile_csv(std::ostream& out, const TemporalProfile& profile) {
  out << "weekday,hour,days,mean_trips,std_trips\n";
  for (std::size_t w = 0; w < 7; ++w) {
    for (std::size_t h = 0; h < 24; ++h) {
      out << w << ',' << h << ',' << profile.weekday_days[w] << ',' << csv::format_double(profile.mean[w][h])
          << ',' << csv::format_double(profile.stddev[w][h]) << '\n';
    }
  }
}

void write_weekly_csv(std::ostream& out, const TemporalProfile& profile) {
  out << "week_start,trips_m,trips_e\n";
  for (const auto& w : profile.weekly) {
    out << w.week_start.to_string() << ',' << w.trips[0] << ',' << w.trips[1] << '\n';
  }
}

void write_daily_csv(std::ostream& out, const TemporalProfile& profile) {
  out << "date,trips_m,trips_e,active_bikes_m,active_bikes_e,trips_per_bike_m,trips_per_bike_e\n";
  for (const auto& d : profile.daily) {
    out << d.date.to_string() << ',' << d.trips[0] << ',' << d.trips[1] << ',' << d.active_bikes[0] << ','
        << d.active_bikes[1] << ',' << opt(d.trips_per_bike[0]) << ',' << opt(d.trips_per_bike[1]) << '\n';
  }
}

std::string test_result_json(const stats::TestResult& r) {
  nlohmann::ordered_json j;
  j["test"] = r.test;
  j["statistic"] = std::isfinite(r.statistic) ? nlohmann::ordered_json(r.statistic)
                                              : nlohmann::ordered_json(r.statistic > 0 ? "inf" : "-inf");
  j["p_value"] = r.p_value;
  j["alpha"] = r.alpha;
  j["significant"] = r.significant;
  return j.dump();
}

}  // namespace fleetsurv::mobility
