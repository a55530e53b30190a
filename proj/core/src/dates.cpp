#include "fleetsurv/dates.hpp"

#include <chrono>
#include <cstdio>

#include "fleetsurv/errors.hpp"

namespace fleetsurv {
namespace {

int parse_digits(std::string_view s, std::size_t pos, std::size_t count, std::string_view whole) {
  if (pos + count > s.size()) throw DataError("truncated date/time '" + std::string(whole) + "'");
  int value = 0;
  for (std::size_t i = pos; i < pos + count; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') throw DataError("invalid date/time '" + std::string(whole) + "'");
    value = value * 10 + (c - '0');
  }
  return value;
}

void expect_char(std::string_view s, std::size_t pos, char c, std::string_view whole) {
  if (pos >= s.size() || s[pos] != c) throw DataError("invalid date/time '" + std::string(whole) + "'");
}

std::chrono::year_month_day to_ymd(Date d) {
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{d.days}}};
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
    throw DataError(std::string("invalid calendar date ") + buf);
  }
  return Date{static_cast<std::int32_t>(std::chrono::sys_days{ymd}.time_since_epoch().count())};
}

Date Date::parse(std::string_view iso) {
  if (iso.size() != 10) throw DataError("invalid date '" + std::string(iso) + "'");
  const int y = parse_digits(iso, 0, 4, iso);
  expect_char(iso, 4, '-', iso);
  const int m = parse_digits(iso, 5, 2, iso);
  expect_char(iso, 7, '-', iso);
  const int d = parse_digits(iso, 8, 2, iso);
  return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string Date::to_string() const {
  const auto ymd = to_ymd(*this);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::weekday() const {
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  const int w = (days % 7 + 7 + 3) % 7;
  return w;
}

int Date::year() const { return static_cast<int>(to_ymd(*this).year()); }

int Date::day_of_year() const { return *this - from_ymd(year(), 1, 1); }

Timestamp Timestamp::parse(std::string_view iso) {
  std::string_view s = iso;
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 19 || (s[10] != 'T' && s[10] != ' ')) {
    throw DataError("invalid timestamp '" + std::string(iso) + "'");
  }
  const Date day = Date::parse(s.substr(0, 10));
  const int hh = parse_digits(s, 11, 2, iso);
  expect_char(s, 13, ':', iso);
  const int mm = parse_digits(s, 14, 2, iso);
  expect_char(s, 16, ':', iso);
  const int ss = parse_digits(s, 17, 2, iso);
  if (hh > 23 || mm > 59 || ss > 59) throw DataError("invalid timestamp '" + std::string(iso) + "'");
  return Timestamp{static_cast<std::int64_t>(day.days) * 86400 + hh * 3600 + mm * 60 + ss};
}

Date Timestamp::date() const {
  std::int64_t d = seconds / 86400;
  if (seconds % 86400 < 0) --d;
  return Date{static_cast<std::int32_t>(d)};
}

int Timestamp::hour() const {
  std::int64_t r = seconds % 86400;
  if (r < 0) r += 86400;
  return static_cast<int>(r / 3600);
}

std::string Timestamp::to_string() const {
  std::int64_t r = seconds % 86400;
  if (r < 0) r += 86400;
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02dZ", static_cast<int>(r / 3600),
                static_cast<int>(r % 3600 / 60), static_cast<int>(r % 60));
  return date().to_string() + buf;
}

}  // namespace fleetsurv
