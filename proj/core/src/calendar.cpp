#include "nowcast/calendar.hpp"

#include <charconv>
#include <cstdio>

#include "nowcast/error.hpp"

namespace nowcast {
namespace {

using std::chrono::days;
using std::chrono::sys_days;

int parse_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw ParseError("invalid date '" + std::string(whole) + "'");
  }
  return value;
}

bool all_digits(std::string_view s) {
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return !s.empty();
}

// Monday = 0 ... Sunday = 6. 1970-01-01 was a Thursday.
int iso_weekday_index(sys_days d) {
  const long n = d.time_since_epoch().count();
  return static_cast<int>(((n + 3) % 7 + 7) % 7);
}

sys_days monday_of(sys_days d) { return d - days{iso_weekday_index(d)}; }

}  // namespace

sys_days Date::days() const {
  return sys_days{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
}

Date Date::from_days(sys_days d) {
  const std::chrono::year_month_day ymd{d};
  return Date{static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
              static_cast<unsigned>(ymd.day())};
}

std::string Date::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
  return buf;
}

Date parse_date(std::string_view text) {
  std::string_view head = text;
  if (const auto cut = head.find_first_of("T "); cut != std::string_view::npos) {
    head = head.substr(0, cut);
  }
  if (head.size() != 10 || head[4] != '-' || head[7] != '-' ||
      !all_digits(head.substr(0, 4)) || !all_digits(head.substr(5, 2)) ||
      !all_digits(head.substr(8, 2))) {
    throw ParseError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  const Date date{parse_int(head.substr(0, 4), text),
                  static_cast<unsigned>(parse_int(head.substr(5, 2), text)),
                  static_cast<unsigned>(parse_int(head.substr(8, 2), text))};
  const std::chrono::year_month_day ymd{std::chrono::year{date.year},
                                        std::chrono::month{date.month},
                                        std::chrono::day{date.day}};
  if (!ymd.ok()) throw ParseError("invalid calendar date '" + std::string(text) + "'");
  return date;
}

Date parse_month(std::string_view text) {
  if (text.size() != 7 || text[4] != '-' || !all_digits(text.substr(0, 4)) ||
      !all_digits(text.substr(5, 2))) {
    throw ParseError("invalid month '" + std::string(text) + "', expected YYYY-MM");
  }
  const Date date{parse_int(text.substr(0, 4), text),
                  static_cast<unsigned>(parse_int(text.substr(5, 2), text)), 1};
  if (date.month < 1 || date.month > 12) {
    throw ParseError("invalid month '" + std::string(text) + "'");
  }
  return date;
}

Date parse_month_or_date(std::string_view text) {
  return text.size() == 7 ? parse_month(text) : parse_date(text);
}

BucketUnit parse_bucket_unit(std::string_view text) {
  if (text == "day") return BucketUnit::kDay;
  if (text == "week") return BucketUnit::kWeek;
  if (text == "month") return BucketUnit::kMonth;
  throw InvalidArgument("unknown bucket unit '" + std::string(text) +
                        "' (expected day, week or month)");
}

std::string_view to_string(BucketUnit unit) {
  switch (unit) {
    case BucketUnit::kDay:
      return "day";
    case BucketUnit::kWeek:
      return "week";
    case BucketUnit::kMonth:
      return "month";
  }
  return "month";
}

std::string Bucket::label() const {
  const Date d = Date::from_days(start);
  char buf[48];
  switch (unit) {
    case BucketUnit::kDay:
      return d.str();
    case BucketUnit::kWeek: {
      const Date thursday = Date::from_days(start + days{3});
      const sys_days jan1 = Date{thursday.year, 1, 1}.days();
      const long week = (start + days{3} - jan1).count() / 7 + 1;
      std::snprintf(buf, sizeof buf, "%04d-W%02ld", thursday.year, week);
      return buf;
    }
    case BucketUnit::kMonth:
      std::snprintf(buf, sizeof buf, "%04d-%02u", d.year, d.month);
      return buf;
  }
  return d.str();
}

sys_days Bucket::end() const {
  switch (unit) {
    case BucketUnit::kDay:
      return start + days{1};
    case BucketUnit::kWeek:
      return start + days{7};
    case BucketUnit::kMonth: {
      const Date d = Date::from_days(start);
      return d.month == 12 ? Date{d.year + 1, 1, 1}.days() : Date{d.year, d.month + 1, 1}.days();
    }
  }
  return start;
}

Bucket bucket_of(const Date& date, BucketUnit unit) {
  switch (unit) {
    case BucketUnit::kDay:
      return {unit, date.days()};
    case BucketUnit::kWeek:
      return {unit, monday_of(date.days())};
    case BucketUnit::kMonth:
      return {unit, Date{date.year, date.month, 1}.days()};
  }
  return {unit, date.days()};
}

Bucket parse_bucket_label(std::string_view label, BucketUnit unit) {
  switch (unit) {
    case BucketUnit::kDay:
      return {unit, parse_date(label).days()};
    case BucketUnit::kMonth:
      return {unit, parse_month(label).days()};
    case BucketUnit::kWeek: {
      if (label.size() != 8 || label[4] != '-' || label[5] != 'W' ||
          !all_digits(label.substr(0, 4)) || !all_digits(label.substr(6, 2))) {
        throw ParseError("invalid ISO week '" + std::string(label) + "', expected YYYY-Www");
      }
      const int year = parse_int(label.substr(0, 4), label);
      const int week = parse_int(label.substr(6, 2), label);
      if (week < 1 || week > 53) throw ParseError("invalid ISO week '" + std::string(label) + "'");
      const sys_days week1 = monday_of(Date{year, 1, 4}.days());
      Bucket b{unit, week1 + days{7 * (week - 1)}};
      if (b.label() != label) throw ParseError("invalid ISO week '" + std::string(label) + "'");
      return b;
    }
  }
  throw InvalidArgument("unknown bucket unit");
}

}  // namespace nowcast
