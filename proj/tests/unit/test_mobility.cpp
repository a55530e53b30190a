#include <gtest/gtest.h>

#include <sstream>

#include "fleetsurv/errors.hpp"
#include "fleetsurv/mobility.hpp"

namespace fleetsurv::mobility {
namespace {

Trip make_trip(const std::string& id, const std::string& bike, BikeModel model, const std::string& from,
               const std::string& to, const std::string& start, std::int64_t seconds) {
  Trip t;
  t.trip_id = id;
  t.bike_id = bike;
  t.bike_model = model;
  t.start_station = from;
  t.end_station = to;
  t.start_time = Timestamp::parse(start);
  t.end_time = Timestamp{t.start_time.seconds + seconds};
  return t;
}

ingest::StationTable stations() {
  return ingest::StationTable({ingest::Station{"A", 0, 0, 10}, ingest::Station{"B", 0, 0, 80},
                               ingest::Station{"C", 0, 0, 200}});
}

ingest::DistanceMatrix distances() {
  ingest::DistanceMatrix d;
  d.insert("A", "B", 1000);
  d.insert("B", "A", 1200);
  d.insert("A", "C", 3000);
  return d;
}

TEST(FilterTrips, BoundsAreInclusive) {
  const std::vector<Trip> trips{
      make_trip("t1", "b", BikeModel::kMechanical, "A", "B", "2022-01-03T08:00:00", 119),
      make_trip("t2", "b", BikeModel::kMechanical, "A", "B", "2022-01-03T08:00:00", 120),
      make_trip("t3", "b", BikeModel::kMechanical, "A", "B", "2022-01-03T08:00:00", 3600),
      make_trip("t4", "b", BikeModel::kMechanical, "A", "B", "2022-01-03T08:00:00", 3601),
  };
  const auto r = filter_trips(trips);
  ASSERT_EQ(r.trips.size(), 2u);
  EXPECT_EQ(r.trips[0].trip_id, "t2");
  EXPECT_EQ(r.trips[1].trip_id, "t3");
  EXPECT_DOUBLE_EQ(r.retained_fraction(), 0.5);
}

TEST(EnrichTrips, MetricsAndSkips) {
  const std::vector<Trip> trips{
      make_trip("t1", "b", BikeModel::kElectric, "A", "B", "2022-01-03T08:00:00", 300),
      make_trip("t2", "b", BikeModel::kElectric, "B", "C", "2022-01-03T09:00:00", 300),  // no distance
      make_trip("t3", "b", BikeModel::kElectric, "A", "Z", "2022-01-03T10:00:00", 300),  // unknown station
      make_trip("t4", "b", BikeModel::kElectric, "B", "A", "2022-01-03T11:00:00", 360),
  };
  const auto r = enrich_trips(trips, distances(), stations());
  ASSERT_EQ(r.metrics.size(), 2u);
  EXPECT_EQ(r.skipped.size(), 2u);
  EXPECT_EQ(r.metrics[0].trip_index, 0u);
  EXPECT_DOUBLE_EQ(r.metrics[0].speed_kmh, 12.0);
  EXPECT_DOUBLE_EQ(r.metrics[0].elevation_m, 70.0);
  EXPECT_EQ(r.metrics[1].trip_index, 3u);
  EXPECT_DOUBLE_EQ(r.metrics[1].distance_m, 1200.0);  // directed distance
  EXPECT_DOUBLE_EQ(r.metrics[1].elevation_m, -70.0);
}

TEST(StationFlows, PercentagesAndUndefinedCells) {
  const std::vector<Trip> trips{
      make_trip("t1", "m1", BikeModel::kMechanical, "A", "B", "2022-01-03T08:00:00", 300),
      make_trip("t2", "e1", BikeModel::kElectric, "A", "B", "2022-01-03T08:00:00", 300),
      make_trip("t3", "e1", BikeModel::kElectric, "A", "B", "2022-01-03T08:00:00", 300),
      make_trip("t4", "e1", BikeModel::kElectric, "B", "A", "2022-01-03T08:00:00", 300),
  };
  const auto t = station_flows(trips, stations());
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.trips_counted, 4u);
  const auto& a = t.rows[0];
  EXPECT_EQ(a.outgoing[0], 1u);
  EXPECT_EQ(a.outgoing[1], 2u);
  EXPECT_NEAR(*a.outgoing_pct[1], 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(*a.outgoing_diff, 100.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(*a.incoming_pct[1], 100.0);
  EXPECT_NEAR(*a.in_out_diff[1], 100.0 - 200.0 / 3.0, 1e-12);
  const auto& c = t.rows[2];
  EXPECT_FALSE(c.incoming_pct[0].has_value());
  EXPECT_FALSE(c.incoming_diff.has_value());
}

TEST(ElevationFlows, BucketsPartitionTrips) {
  const std::vector<Trip> trips{
      make_trip("t1", "m1", BikeModel::kMechanical, "A", "B", "2022-01-03T08:00:00", 300),  // +70
      make_trip("t2", "m1", BikeModel::kMechanical, "B", "A", "2022-01-03T09:00:00", 300),  // -70
      make_trip("t3", "e1", BikeModel::kElectric, "A", "C", "2022-01-03T10:00:00", 600),    // +190
  };
  const auto enriched = enrich_trips(trips, distances(), stations());
  const auto buckets = parse_buckets("-inf:-50,-50:50,50:100,100:inf");
  ASSERT_EQ(buckets.size(), 4u);
  const auto tables = elevation_flows(trips, enriched.metrics, stations(), buckets);
  ASSERT_EQ(tables.size(), 4u);
  EXPECT_EQ(tables[0].trips_counted, 1u);
  EXPECT_EQ(tables[1].trips_counted, 0u);
  EXPECT_EQ(tables[2].trips_counted, 1u);
  EXPECT_EQ(tables[3].trips_counted, 1u);
  EXPECT_THROW(parse_buckets("5:5"), UsageError);
  EXPECT_THROW(elevation_flows(trips, enriched.metrics, stations(), parse_buckets("0:100,50:150")), UsageError);
  EXPECT_EQ(buckets[0].label(), "[-inf,-50)");
}

TEST(TemporalProfile, CountsPerDayAndHour) {
  std::vector<Trip> trips;
  // Monday 2022-01-03 and the following Monday; only the first has traffic at 08h.
  trips.push_back(make_trip("t1", "m1", BikeModel::kMechanical, "A", "B", "2022-01-03T08:10:00", 300));
  trips.push_back(make_trip("t2", "m1", BikeModel::kMechanical, "A", "B", "2022-01-03T08:40:00", 300));
  trips.push_back(make_trip("t3", "e1", BikeModel::kElectric, "A", "B", "2022-01-03T18:00:00", 300));
  trips.push_back(make_trip("t4", "e2", BikeModel::kElectric, "A", "B", "2022-01-10T18:00:00", 300));
  const auto p = temporal_profile(trips);
  EXPECT_EQ(p.weekday_days[0], 2u);
  EXPECT_EQ(p.weekday_days[1], 1u);
  EXPECT_DOUBLE_EQ(p.mean[0][8], 1.0);
  EXPECT_DOUBLE_EQ(p.mean[0][18], 1.0);
  EXPECT_DOUBLE_EQ(p.stddev[0][18], 0.0);
  ASSERT_EQ(p.daily.size(), 8u);
  EXPECT_EQ(p.daily[0].trips[0], 2u);
  EXPECT_EQ(p.daily[0].active_bikes[0], 1u);
  EXPECT_DOUBLE_EQ(*p.daily[0].trips_per_bike[0], 2.0);
  EXPECT_FALSE(p.daily[1].trips_per_bike[0].has_value());
  ASSERT_EQ(p.weekly.size(), 2u);
  EXPECT_EQ(p.weekly[0].week_start.to_string(), "2022-01-03");
  EXPECT_EQ(p.weekly[0].trips[0] + p.weekly[0].trips[1], 3u);

  std::ostringstream csv;
  write_daily_csv(csv, p);
  EXPECT_EQ(csv.str().substr(0, 5), "date,");
}

}  // namespace
}  // namespace fleetsurv::mobility
