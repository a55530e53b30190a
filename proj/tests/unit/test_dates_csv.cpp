#include <gtest/gtest.h>

#include <limits>

#include "fleetsurv/config.hpp"
#include "fleetsurv/csv.hpp"
#include "fleetsurv/dates.hpp"
#include "fleetsurv/errors.hpp"

namespace fleetsurv {
namespace {

TEST(Dates, RoundTripAndWeekday) {
  const auto d = Date::parse("2022-03-14");
  EXPECT_EQ(d.to_string(), "2022-03-14");
  EXPECT_EQ(d.weekday(), 0);  // a Monday
  EXPECT_EQ(Date::parse("1970-01-01").days, 0);
  EXPECT_EQ(Date::parse("2024-12-31").day_of_year(), 365);
  EXPECT_EQ(Date::parse("2023-01-01") - Date::parse("2022-01-01"), 365);
  EXPECT_THROW(Date::parse("2022-02-30"), DataError);
  EXPECT_THROW(Date::parse("2022-2-3"), DataError);
}

TEST(Dates, Timestamps) {
  const auto t = Timestamp::parse("2022-06-01T08:15:30Z");
  EXPECT_EQ(t.to_string(), "2022-06-01T08:15:30Z");
  EXPECT_EQ(Timestamp::parse("2022-06-01 08:15:30").seconds, t.seconds);
  EXPECT_EQ(t.hour(), 8);
  EXPECT_EQ(t.date().to_string(), "2022-06-01");
  EXPECT_THROW(Timestamp::parse("2022-06-01T24:00:00"), DataError);
  EXPECT_THROW(Timestamp::parse("2022-06-01"), DataError);
}

TEST(Dates, WindowIsHalfOpen) {
  const DateWindow w{Date::parse("2022-01-01"), Date::parse("2022-01-03")};
  EXPECT_EQ(w.length(), 2);
  EXPECT_TRUE(w.contains(Date::parse("2022-01-01")));
  EXPECT_TRUE(w.contains(Date::parse("2022-01-02")));
  EXPECT_FALSE(w.contains(Date::parse("2022-01-03")));
}

TEST(Csv, SplitAndParse) {
  const auto f = csv::split("a,,b,");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f[0], "a");
  EXPECT_EQ(f[1], "");
  EXPECT_EQ(f[3], "");
  EXPECT_DOUBLE_EQ(csv::parse_double("2.5"), 2.5);
  EXPECT_EQ(csv::parse_int("-12"), -12);
  EXPECT_THROW(csv::parse_double("2.5x"), DataError);
  EXPECT_THROW(csv::parse_double(""), DataError);
  EXPECT_THROW(csv::parse_int("1.0"), DataError);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5}) {
    EXPECT_EQ(csv::parse_double(csv::format_double(v)), v);
  }
}

TEST(KeyValueConfig, SectionsAndTypes) {
  const auto cfg = KeyValueConfig::parse(
      "# comment\n"
      "seed = 4\n"
      "; another\n"
      "[tune]\n"
      "trials = 12\n"
      "no_pruning = true\n"
      "split = 0.5, 0.25, 0.25\n");
  EXPECT_EQ(cfg.get_int("seed", 0), 4);
  EXPECT_EQ(cfg.get_int("tune.trials", 0), 12);
  EXPECT_TRUE(cfg.get_bool("tune.no_pruning", false));
  EXPECT_EQ(cfg.get_doubles("tune.split", {}).size(), 3u);
  EXPECT_EQ(cfg.section("tune").size(), 3u);
  EXPECT_EQ(cfg.section("").size(), 1u);
  EXPECT_EQ(cfg.get_string("missing", "x"), "x");
  EXPECT_THROW((void)cfg.get_double("tune.no_pruning", 0), UsageError);
  EXPECT_THROW(KeyValueConfig::parse("just words\n"), UsageError);
  EXPECT_THROW(KeyValueConfig::parse("[open\n"), UsageError);
}

}  // namespace
}  // namespace fleetsurv
