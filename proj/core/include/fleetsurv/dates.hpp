#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace fleetsurv {

/// Calendar date (UTC) stored as days since 1970-01-01.
struct Date {
  std::int32_t days = 0;

  static Date parse(std::string_view iso);  // YYYY-MM-DD, throws DataError
  static Date from_ymd(int year, unsigned month, unsigned day);

  [[nodiscard]] std::string to_string() const;
  /// 0 = Monday ... 6 = Sunday.
  [[nodiscard]] int weekday() const;
  [[nodiscard]] int year() const;
  [[nodiscard]] int day_of_year() const;  // 0-based

  friend constexpr auto operator<=>(Date, Date) = default;
  friend constexpr Date operator+(Date d, std::int32_t n) { return Date{d.days + n}; }
  friend constexpr Date operator-(Date d, std::int32_t n) { return Date{d.days - n}; }
  friend constexpr std::int32_t operator-(Date a, Date b) { return a.days - b.days; }
};

/// Second-granularity UTC timestamp, seconds since the epoch.
struct Timestamp {
  std::int64_t seconds = 0;

  /// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional trailing 'Z'; a space
  /// is accepted in place of 'T'.
  static Timestamp parse(std::string_view iso);

  [[nodiscard]] std::string to_string() const;  // YYYY-MM-DDTHH:MM:SSZ
  [[nodiscard]] Date date() const;
  [[nodiscard]] int hour() const;

  friend constexpr auto operator<=>(Timestamp, Timestamp) = default;
};

/// Closed-open day range [start, end).
struct DateWindow {
  Date start;
  Date end;

  [[nodiscard]] std::int32_t length() const { return end - start; }
  [[nodiscard]] bool contains(Date d) const { return d >= start && d < end; }
};

}  // namespace fleetsurv
