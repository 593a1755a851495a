#pragma once

#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace nowcast::detail {

/// Minimal RFC 4180 reader: quoted fields may contain commas, doubled
/// quotes and newlines. Tracks the physical line where each record starts.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  /// Returns false at end of stream.
  bool next(std::vector<std::string>& fields);
  std::size_t record_line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

std::string csv_escape(std::string_view field);

/// Strips a UTF-8 byte-order mark and surrounding ASCII whitespace.
std::string_view trim(std::string_view s);

}  // namespace nowcast::detail
