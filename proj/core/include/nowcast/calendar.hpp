#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace nowcast {

/// A calendar day. Construction through `parse_date` validates the fields.
struct Date {
  int year = 1970;
  unsigned month = 1;
  unsigned day = 1;

  std::chrono::sys_days days() const;
  static Date from_days(std::chrono::sys_days d);

  std::string str() const;  // YYYY-MM-DD

  auto operator<=>(const Date&) const = default;
};

/// Parses `YYYY-MM-DD`. Any trailing time component (`T...` or ` ...`) is
/// truncated to the day.
Date parse_date(std::string_view text);

/// Parses `YYYY-MM` and returns the first day of that month.
Date parse_month(std::string_view text);

/// Accepts either `YYYY-MM` or `YYYY-MM-DD`.
Date parse_month_or_date(std::string_view text);

enum class BucketUnit { kDay, kWeek, kMonth };

BucketUnit parse_bucket_unit(std::string_view text);
std::string_view to_string(BucketUnit unit);

/// A time bucket identified by its first day. Weeks start on Monday (ISO).
struct Bucket {
  BucketUnit unit = BucketUnit::kMonth;
  std::chrono::sys_days start{};

  /// `YYYY-MM-DD`, `YYYY-Www` (ISO week) or `YYYY-MM`.
  std::string label() const;
  /// First day of the following bucket.
  std::chrono::sys_days end() const;
  Bucket next() const { return Bucket{unit, end()}; }

  bool operator==(const Bucket& o) const { return unit == o.unit && start == o.start; }
  auto operator<=>(const Bucket& o) const { return start <=> o.start; }
};

Bucket bucket_of(const Date& date, BucketUnit unit);

/// Inverse of `Bucket::label()`.
Bucket parse_bucket_label(std::string_view label, BucketUnit unit);

}  // namespace nowcast
